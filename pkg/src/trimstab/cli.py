"""Command-line front end: ``simulate``, ``bdp``, ``surplus`` and ``datagen``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import harness
from .breakdown import (
    BreakdownQuery,
    CellProfile,
    RankContext,
    breakdown_probability,
    monte_carlo_breakdown,
    robustness_surplus,
)
from .breakdown.theorems import trimmed_breakdown_threshold
from .synthdata import ContaminationSpec, Scheme, contaminate, generate_dataset, save_dataset

_ATTACKS = {
    "none": None,
    "column-zero": Scheme.COLUMN_ZERO_RELEVANT,
    "case-wise": Scheme.CASE_WISE,
    "cell-wise": Scheme.CELL_WISE_RANDOM,
    "response": Scheme.RESPONSE_ONLY,
}
_QUERY_KEYS = {f for f in BreakdownQuery.__dataclass_fields__}
_REQUIRED = ("n", "n_sub", "B")


class UsageError(Exception):
    pass


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_set(d: dict, assignment: str):
    if "=" not in assignment:
        raise UsageError(f"--set expects key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    cur = d
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
        if not isinstance(cur, dict):
            raise UsageError(f"--set {key}: {p} is not an object")
    cur[parts[-1]] = _parse_value(value)


def build_query(raw: dict) -> BreakdownQuery:
    """BreakdownQuery from a JSON-style dict; nested ``rank`` and ``cell`` objects allowed."""
    raw = dict(raw)
    unknown = set(raw) - _QUERY_KEYS
    if unknown:
        raise UsageError(f"unknown query field(s): {', '.join(sorted(unknown))}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise UsageError(f"query is missing required field(s): {', '.join(missing)}")
    rank = raw.get("rank")
    if isinstance(rank, dict):
        if "delta" in rank:
            raw["rank"] = RankContext.with_gap(rank["delta"])
        else:
            miss = [k for k in ("pi_plus", "pi_minus", "q") if k not in rank]
            if miss:
                raise UsageError("query is missing required field(s): "
                                 + ", ".join(f"rank.{k}" for k in miss))
            raw["rank"] = RankContext(rank["pi_plus"], rank["pi_minus"], rank["q"])
    cell = raw.get("cell")
    if isinstance(cell, dict):
        miss = [k for k in ("category_counts", "relevant_counts", "p", "s0") if k not in cell]
        if miss:
            raise UsageError("query is missing required field(s): "
                             + ", ".join(f"cell.{k}" for k in miss))
        raw["cell"] = CellProfile(cell["category_counts"], cell["relevant_counts"],
                                  cell.get("response_outliers", 0), cell["p"], cell["s0"])
    try:
        return BreakdownQuery(**raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _load_query(args) -> dict:
    raw = {}
    if args.query:
        try:
            raw = json.loads(Path(args.query).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.query}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise UsageError(f"{args.query}: query must be a JSON object")
    for s in args.set or []:
        _apply_set(raw, s)
    return raw


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(payload: dict, out):
    text = json.dumps(_jsonable(payload), indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_bdp(args) -> int:
    query = build_query(_load_query(args))
    try:
        if args.monte_carlo:
            res = monte_carlo_breakdown(query, trials=args.trials, seed=args.seed)
        else:
            res = breakdown_probability(query)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit({"query": query.to_dict(), "result": res.to_dict()}, args.out)
    return 0


def cmd_surplus(args) -> int:
    raw = _load_query(args)
    if args.gamma is not None:
        raw["gamma"] = args.gamma
    if args.k_gamma is not None:
        raw["k_gamma"] = args.k_gamma
    query = build_query(raw)
    try:
        res = robustness_surplus(query, mode=args.mode, alpha=args.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    payload = {"query": query.to_dict(), "surplus": asdict(res)}
    if query.rule == "threshold" and query.max_pi_plus is not None and query.pi_thr is not None:
        K = math.ceil(round(query.B * (query.max_pi_plus - query.pi_thr), 9))
        payload["K"] = K
        payload["K_trimmed"] = trimmed_breakdown_threshold(K, query.B, query.gamma,
                                                           query.k_gamma)
    _emit(payload, args.out)
    return 0


def cmd_datagen(args) -> int:
    d = generate_dataset(args.n, args.p, args.s0, args.snr, args.seed)
    scheme = _ATTACKS[args.attack]
    if scheme is not None:
        spec = ContaminationSpec(scheme=scheme, row_count=args.rows, cell_rate=args.cell_rate,
                                 replacement_value=args.value)
        d = contaminate(d, spec, args.seed + 1)
    csv_path, sidecar = save_dataset(d, args.out)
    print(f"wrote {csv_path} and {sidecar}")
    return 0


def cmd_simulate(args) -> int:
    if args.config:
        cfg = harness.load_config(args.config)
    elif args.preset:
        names = [s.strip() for s in args.preset.split(",") if s.strip()]
        try:
            cfg = harness.ExperimentConfig(scenarios=tuple(harness.preset(nm) for nm in names))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError("simulate needs --config or --preset")
    cfg = cfg.with_overrides(seed=args.seed, workers=args.workers, out=args.out,
                             replications=args.replications_override)

    def progress(scenario, rep, done, total):
        if not args.quiet and (done == total or done % 10 == 0):
            print(f"[{done}/{total}] scenario {scenario} replication {rep}", file=sys.stderr)

    out = harness.run_experiment(cfg, progress=progress)
    rows = harness.read_summary(out)
    if not args.quiet:
        print(f"{'scenario':<9}{'method':<8}{'mean_tpr':>9}{'tpr=1':>7}{'tpr=0':>7}")
        for r in rows:
            print(f"{r['scenario']:<9}{r['method']:<8}{float(r['mean_tpr_count']):>9.3f}"
                  f"{r['cases_tpr1']:>7}{r['cases_tpr0']:>7}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trimstab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the scenario study")
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--preset", help="comma-separated preset scenarios, e.g. 1a,2a")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", help="output directory")
    p.add_argument("--replications-override", type=int, help="replications per scenario")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_simulate)

    for name, helptext in (("bdp", "breakdown probability of a query"),
                           ("surplus", "robustness surplus of a query")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--query", help="query JSON file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="set a query field (dotted keys for rank./cell.)")
        p.add_argument("--out", help="write JSON here instead of stdout")
        if name == "bdp":
            p.add_argument("--monte-carlo", action="store_true", help="simulate instead")
            p.add_argument("--trials", type=int, default=100_000)
            p.add_argument("--seed", type=int, default=0)
            p.set_defaults(func=cmd_bdp)
        else:
            p.add_argument("--gamma", type=float, help="trimming level")
            p.add_argument("--k-gamma", type=int, help="broken models among the trimmed ones")
            p.add_argument("--mode", default="probability_ratio",
                           choices=["probability_ratio", "bdp_ratio"])
            p.add_argument("--alpha", type=float, default=0.5)
            p.set_defaults(func=cmd_surplus)

    p = sub.add_parser("datagen", help="write a synthetic dataset")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--p", type=int, default=25)
    p.add_argument("--s0", type=int, default=5)
    p.add_argument("--snr", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attack", choices=sorted(_ATTACKS), default="none")
    p.add_argument("--rows", type=int, default=0, help="attacked rows")
    p.add_argument("--cell-rate", type=float, default=0.0)
    p.add_argument("--value", type=float, default=0.0, help="replacement value")
    p.add_argument("--out", default="data.csv")
    p.set_defaults(func=cmd_datagen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, harness.ConfigError, ValueError, OSError) as exc:
        print(f"trimstab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
