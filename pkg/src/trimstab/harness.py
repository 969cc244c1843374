"""Simulation harness for the contaminated sparse-regression scenario study.

Each replication draws a clean dataset, zeroes the relevant cells of ``m_tilde``
random rows, then runs every configured method on that same dataset with its
own resampling seed. Rows are streamed to ``replications.csv`` in replication
order; ``summary.csv`` holds one row per (scenario, method).
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .metrics import RunScore, score, summarize
from .resample import KINDS, ResamplePlan
from .selector import SelectorConfig
from .stability import Rank, Threshold, run_stability_selection
from .synthdata import ContaminationSpec, Scheme, contaminate, generate_dataset

SCHEMA_VERSION = 1
DEFAULT_MASTER_SEED = 20240601
# selector target used by the presets; see README ("Base selector")
HARNESS_TARGET_NONZEROS = 15

SUMMARY_COLUMNS = ["scenario", "method", "mean_tpr_count", "mean_tpr_rate", "cases_tpr1",
                   "cases_tpr0", "replications", "seed"]
REPLICATION_COLUMNS = ["scenario", "replication", "method", "gamma", "B", "recovered", "tpr",
                       "full_recovery", "total_miss", "false_positives", "stable"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    label: str
    gamma: float
    B: int

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"method {self.label!r}: gamma must lie in [0, 1)")
        if int(self.B) != self.B or self.B < 1:
            raise ValueError(f"method {self.label!r}: B must be a positive integer")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    n: int
    p: int
    s0: int
    m_tilde: int
    snr: float
    n_sub: int
    methods: tuple
    replications: int = 1000
    master_seed: int = DEFAULT_MASTER_SEED
    resampling: str = "subsample"
    rule: dict = field(default_factory=lambda: {"kind": "rank", "q": 5})
    target_nonzeros: int = HARNESS_TARGET_NONZEROS

    def __post_init__(self):
        for key in ("n", "p", "s0", "m_tilde", "n_sub", "replications", "target_nonzeros"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"scenario {self.name!r}: {key} must be a nonnegative integer")
        if self.n < 2 or not 1 <= self.s0 <= self.p:
            raise ValueError(f"scenario {self.name!r}: need n >= 2 and 1 <= s0 <= p")
        if not 1 <= self.n_sub < self.n:
            raise ValueError(f"scenario {self.name!r}: need 1 <= n_sub < n")
        if self.m_tilde > self.n:
            raise ValueError(f"scenario {self.name!r}: m_tilde exceeds n")
        if not self.snr > 0:
            raise ValueError(f"scenario {self.name!r}: snr must be positive")
        if self.resampling not in KINDS:
            raise ValueError(f"scenario {self.name!r}: resampling must be one of {KINDS}")
        if self.replications < 1:
            raise ValueError(f"scenario {self.name!r}: replications must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError(f"scenario {self.name!r}: master_seed must fit in 64 bits")
        object.__setattr__(self, "methods", tuple(
            m if isinstance(m, MethodSpec) else MethodSpec(**m) for m in self.methods))
        labels = [m.label for m in self.methods]
        if not labels or len(set(labels)) != len(labels):
            raise ValueError(f"scenario {self.name!r}: method labels must be nonempty and unique")
        self.stable_rule()

    def stable_rule(self):
        kind = self.rule.get("kind")
        extra = set(self.rule) - {"kind", "q", "pi_thr"}
        if extra:
            raise ValueError(f"scenario {self.name!r}: unknown rule key(s) {sorted(extra)}")
        if kind == "rank":
            return Rank(int(self.rule.get("q", 5)))
        if kind == "threshold":
            if "pi_thr" not in self.rule:
                raise ValueError(f"scenario {self.name!r}: threshold rule needs pi_thr")
            return Threshold(float(self.rule["pi_thr"]))
        raise ValueError(f"scenario {self.name!r}: rule kind must be 'rank' or 'threshold'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = [asdict(m) for m in self.methods]
        d["snr"] = "inf" if math.isinf(self.snr) else self.snr
        return d


# (p, n, m_tilde, n_sub, [(B, gamma) for T1, T2, T3])
_TABLE1 = {
    1: (25, 50, 2, 25, [(100, 0.5), (100, 0.75), (100, 0.9)]),
    2: (50, 100, 2, 50, [(100, 0.5), (100, 0.75), (100, 0.9)]),
    3: (50, 100, 5, 50, [(100, 0.75), (100, 0.9), (1000, 0.95)]),
    4: (200, 200, 20, 100, [(100, 0.5), (100, 0.75), (1000, 0.9)]),
    5: (500, 200, 10, 100, [(100, 0.75), (1000, 0.95), (1000, 0.99)]),
}
_SNR = {"a": 5.0, "b": 2.0, "c": 1.0}
PRESET_NAMES = tuple(f"{k}{s}" for k in _TABLE1 for s in _SNR)


def preset(name: str, replications: int = 1000,
           master_seed: int = DEFAULT_MASTER_SEED) -> ScenarioConfig:
    """Scenario ``name`` (``"1a"`` ... ``"5c"``) with the StabSel baseline and T1-T3."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    p, n, m_tilde, n_sub, trims = _TABLE1[int(name[0])]
    methods = [MethodSpec("SS", 0.0, 100)]
    methods += [MethodSpec(f"T{i + 1}", g, B) for i, (B, g) in enumerate(trims)]
    return ScenarioConfig(name=name, n=n, p=p, s0=5, m_tilde=m_tilde, snr=_SNR[name[1]],
                          n_sub=n_sub, methods=tuple(methods), replications=replications,
                          master_seed=master_seed)


# seeding

def _key(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def _seed_seq(sc: ScenarioConfig, rep: int, *tail) -> np.random.SeedSequence:
    return np.random.SeedSequence(sc.master_seed, spawn_key=(_key(sc.name), rep, *tail))


def _u64(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replication_dataset(sc: ScenarioConfig, rep: int):
    """Clean and contaminated dataset of replication ``rep`` (0-based)."""
    data_seed, attack_seed = (int(v) for v in _seed_seq(sc, rep, 0).generate_state(2))
    clean = generate_dataset(sc.n, sc.p, sc.s0, sc.snr, data_seed)
    spec = ContaminationSpec(scheme=Scheme.COLUMN_ZERO_RELEVANT, row_count=sc.m_tilde)
    return clean, contaminate(clean, spec, attack_seed)


def method_seed(sc: ScenarioConfig, rep: int, label: str) -> int:
    return _u64(_seed_seq(sc, rep, 1, _key(label)))


def run_replication(sc: ScenarioConfig, rep: int) -> list[dict]:
    _, data = replication_dataset(sc, rep)
    cfg = SelectorConfig(target_nonzeros=sc.target_nonzeros)
    rule = sc.stable_rule()
    rows = []
    for m in sc.methods:
        seed = method_seed(sc, rep, m.label)
        plan = ResamplePlan(sc.resampling, sc.n, sc.n_sub, m.B, seed)
        run = run_stability_selection(data, plan, cfg, rule, m.gamma, seed)
        s = score(run.stable, data.support)
        rows.append({
            "scenario": sc.name, "replication": rep, "method": m.label,
            "gamma": repr(float(m.gamma)), "B": m.B, "recovered": s.recovered,
            "tpr": repr(s.tpr), "full_recovery": int(s.full_recovery),
            "total_miss": int(s.total_miss), "false_positives": s.false_positives,
            "stable": " ".join(str(int(j)) for j in run.stable),
        })
    return rows


def _task(args):
    sc, rep = args
    return rep, run_replication(sc, rep)


# config parsing

class _LocatedDict(dict):
    line = 0
    key_lines: dict = {}


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _located_loads(text: str):
    """``json.loads`` whose objects remember the line of each of their keys."""
    decoder = json.JSONDecoder()
    base = decoder.parse_object

    def parse_object(s_and_end, *args, **kw):
        s, start = s_and_end
        obj, end = base(s_and_end, *args, **kw)
        out = _LocatedDict(obj)
        out.line = _line_of(s, start)
        out.key_lines = {}
        cursor = start
        for k in obj:
            pos = s.find(json.dumps(k), cursor, end)
            if pos >= 0:
                out.key_lines[k] = _line_of(s, pos)
                cursor = pos + 1
            else:
                out.key_lines[k] = out.line
        return out, end

    decoder.parse_object = parse_object
    decoder.scan_once = json.scanner.py_make_scanner(decoder)
    return decoder.decode(text)


def _line(obj, key=None) -> int:
    if isinstance(obj, _LocatedDict):
        return obj.key_lines.get(key, obj.line) if key is not None else obj.line
    return 0


_TOP_KEYS = {"schema_version", "master_seed", "workers", "out", "scenarios"}
_SCENARIO_KEYS = {"preset", "name", "n", "p", "s0", "m_tilde", "snr", "n_sub", "methods",
                  "replications", "master_seed", "resampling", "rule", "target_nonzeros"}
_METHOD_KEYS = {"label", "gamma", "B"}


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple
    master_seed: int = DEFAULT_MASTER_SEED
    workers: int = 1
    out: str = "results"

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "master_seed": self.master_seed,
                "workers": self.workers, "out": self.out,
                "scenarios": [s.to_dict() for s in self.scenarios]}

    def with_overrides(self, seed=None, workers=None, out=None, replications=None):
        scen = self.scenarios
        if seed is not None:
            scen = tuple(replace(s, master_seed=int(seed)) for s in scen)
        if replications is not None:
            scen = tuple(replace(s, replications=int(replications)) for s in scen)
        return replace(self, scenarios=scen,
                       master_seed=self.master_seed if seed is None else int(seed),
                       workers=self.workers if workers is None else int(workers),
                       out=self.out if out is None else str(out))


def _check_keys(obj, allowed, where, src):
    if not isinstance(obj, dict):
        raise ConfigError(f"{src}:{_line(obj)}: {where} must be a JSON object")
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{src}:{_line(obj, k)}: unknown key {k!r} in {where}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Validate an experiment config; errors name the offending line."""
    try:
        raw = _located_loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    _check_keys(raw, _TOP_KEYS, "config", source)
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{source}:{_line(raw, 'schema_version')}: schema_version must be "
                          f"{SCHEMA_VERSION}")
    master_seed = raw.get("master_seed", DEFAULT_MASTER_SEED)
    workers = raw.get("workers", 1)
    for key, val in (("master_seed", master_seed), ("workers", workers)):
        if isinstance(val, bool) or not isinstance(val, int) or val < (key == "workers"):
            raise ConfigError(f"{source}:{_line(raw, key)}: {key} must be a "
                              f"{'positive' if key == 'workers' else 'nonnegative'} integer")
    scen_raw = raw.get("scenarios")
    if not isinstance(scen_raw, list) or not scen_raw:
        raise ConfigError(f"{source}:{_line(raw, 'scenarios')}: scenarios must be a "
                          "nonempty list")
    scenarios = []
    for entry in scen_raw:
        _check_keys(entry, _SCENARIO_KEYS, "scenario", source)
        fields = {"master_seed": master_seed}
        if "preset" in entry:
            try:
                base = preset(entry["preset"], master_seed=master_seed)
            except ValueError as exc:
                raise ConfigError(f"{source}:{_line(entry, 'preset')}: {exc}") from None
            fields.update(asdict(base))
            fields["methods"] = base.methods
        fields.update({k: v for k, v in entry.items() if k != "preset"})
        if "methods" in entry:
            if not isinstance(entry["methods"], list):
                raise ConfigError(f"{source}:{_line(entry, 'methods')}: methods must be a list")
            for m in entry["methods"]:
                _check_keys(m, _METHOD_KEYS, "method", source)
        if fields.get("snr") in ("inf", "Infinity"):
            fields["snr"] = math.inf
        try:
            scenarios.append(ScenarioConfig(**fields))
        except TypeError as exc:
            raise ConfigError(f"{source}:{_line(entry)}: scenario is missing fields "
                              f"({exc})") from None
        except ValueError as exc:
            raise ConfigError(f"{source}:{_line(entry)}: {exc}") from None
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError(f"{source}:{_line(raw, 'scenarios')}: scenario names must be unique")
    return ExperimentConfig(scenarios=tuple(scenarios), master_seed=master_seed,
                            workers=workers, out=str(raw.get("out", "results")))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


# running

def _fingerprint(cfg: ExperimentConfig) -> str:
    # replication counts are left out so a run can be extended in place
    d = cfg.to_dict()
    d.pop("workers")
    d.pop("out")
    for s in d["scenarios"]:
        s.pop("replications")
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _completed(path: Path, cfg: ExperimentConfig):
    """Keep the rows of fully written replications; return the set of (scenario, rep) done."""
    if not path.exists():
        return set()
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh) if None not in r.values()]
    n_methods = {s.name: len(s.methods) for s in cfg.scenarios}
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["scenario"], int(r["replication"])), []).append(r)
    done = {k for k, v in groups.items() if len(v) == n_methods.get(k[0], -1)}
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, REPLICATION_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            if (r["scenario"], int(r["replication"])) in done:
                w.writerow(r)
    return done


def _read_scores(path: Path, sc: ScenarioConfig):
    per_method = {m.label: [] for m in sc.methods}
    with path.open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            if r["scenario"] != sc.name or int(r["replication"]) >= sc.replications:
                continue
            per_method[r["method"]].append(RunScore(
                tpr=float(r["tpr"]), recovered=int(r["recovered"]), s0=sc.s0,
                false_positives=int(r["false_positives"])))
    return per_method


def run_experiment(cfg: ExperimentConfig, progress=None) -> Path:
    """Run (or resume) every scenario and write ``replications.csv`` and ``summary.csv``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = out / "run.json"
    fp = _fingerprint(cfg)
    if meta.exists():
        if json.loads(meta.read_text(encoding="utf-8")).get("fingerprint") != fp:
            raise ConfigError(f"{out} holds results of a different configuration; "
                              "choose another --out")
    else:
        meta.write_text(json.dumps({"fingerprint": fp, "config": cfg.to_dict()}, indent=2)
                        + "\n", encoding="utf-8")
    rep_path = out / "replications.csv"
    done = _completed(rep_path, cfg)
    if not rep_path.exists():
        with rep_path.open("w", newline="", encoding="utf-8") as fh:
            csv.DictWriter(fh, REPLICATION_COLUMNS, lineterminator="\n").writeheader()

    tasks = [(sc, r) for sc in cfg.scenarios for r in range(sc.replications)
             if (sc.name, r) not in done]
    with rep_path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, REPLICATION_COLUMNS, lineterminator="\n")

        def collect(results):
            for i, (rep, rows) in enumerate(results):
                writer.writerows(rows)
                fh.flush()
                if progress is not None:
                    progress(rows[0]["scenario"], rep, i + 1, len(tasks))

        if cfg.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                # map yields in submission order, so the file order never depends on timing
                collect(pool.map(_task, tasks, chunksize=1))
        else:
            collect(map(_task, tasks))

    # rows of one scenario may be interleaved after a resume; sort for a canonical file
    with rep_path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    order = {s.name: i for i, s in enumerate(cfg.scenarios)}
    mpos = {(s.name, m.label): j for s in cfg.scenarios for j, m in enumerate(s.methods)}
    rows.sort(key=lambda r: (order.get(r["scenario"], len(order)), int(r["replication"]),
                             mpos.get((r["scenario"], r["method"]), 0)))
    with rep_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, REPLICATION_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    with (out / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for sc in cfg.scenarios:
            per_method = _read_scores(rep_path, sc)
            for m in sc.methods:
                s = summarize(per_method[m.label])
                w.writerow([sc.name, m.label, repr(s.mean_tpr_count), repr(s.mean_tpr_rate),
                            s.cases_tpr1, s.cases_tpr0, s.replications, sc.master_seed])
    return out


def read_summary(out) -> list[dict]:
    with (Path(out) / "summary.csv").open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
