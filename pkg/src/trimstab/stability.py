"""Stability Selection and Trimmed Stability Selection.

The base selector is fitted on ``B`` resamples; each fit yields a selected
set and an in-sample loss on its own resample rows. Trimming drops the
``floor(gamma * B)`` fits with the largest losses before the per-variable
selection frequencies are aggregated. ``gamma = 0`` is plain Stability
Selection.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._validation import check_fraction, check_int
from .resample import ResampleIndex, ResamplePlan, draw
from .selector import SelectionResult, SelectorConfig, fit_l1_path, in_sample_loss
from .synthdata import Dataset

_THRESH_EPS = 1e-12


@dataclass(frozen=True)
class Threshold:
    pi_thr: float

    def __post_init__(self):
        if not 0.0 < float(self.pi_thr) <= 1.0:
            raise ValueError(f"pi_thr must lie in (0, 1], got {self.pi_thr}")


@dataclass(frozen=True)
class Rank:
    q: int

    def __post_init__(self):
        check_int(self.q, "q", low=1)


StableRule = Union[Threshold, Rank]


@dataclass(frozen=True)
class FrequencyVector:
    pi_hat: np.ndarray
    counts: np.ndarray
    effective_B: int
    gamma: float = 0.0

    @property
    def p(self) -> int:
        return self.pi_hat.shape[0]


@dataclass
class ResampleRecord:
    index: ResampleIndex
    result: SelectionResult
    loss: float


@dataclass
class EnsembleRun:
    per_resample: list
    trimmed_set: np.ndarray
    frequencies: FrequencyVector
    stable: np.ndarray
    rule: StableRule
    gamma: float
    meta: dict = field(default_factory=dict)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.per_resample])

    @property
    def selected_sets(self) -> list:
        return [r.result.selected for r in self.per_resample]

    def to_dict(self) -> dict:
        rule = ({"kind": "threshold", "pi_thr": self.rule.pi_thr}
                if isinstance(self.rule, Threshold) else {"kind": "rank", "q": self.rule.q})
        return {
            "gamma": self.gamma,
            "rule": rule,
            "effective_B": self.frequencies.effective_B,
            "resamples": [
                {"b": r.index.b, "selected": [int(j) for j in r.result.selected],
                 "loss": r.loss}
                for r in self.per_resample
            ],
            "trimmed": [int(b) for b in self.trimmed_set],
            "frequencies": [float(v) for v in self.frequencies.pi_hat],
            "stable": [int(j) for j in self.stable],
            **({"meta": self.meta} if self.meta else {}),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _counts(selected_sets, p):
    counts = np.zeros(p, dtype=np.int64)
    for s in selected_sets:
        s = np.unique(np.fromiter(s, dtype=np.intp))
        if s.size and (s.min() < 0 or s.max() >= p):
            raise ValueError(f"selected index out of range for p={p}")
        counts[s] += 1
    return counts


def aggregate_frequencies(selected_sets, p: int) -> FrequencyVector:
    """Fraction of the selected sets containing each variable."""
    selected_sets = list(selected_sets)
    if not selected_sets:
        raise ValueError("need at least one selected set")
    B = len(selected_sets)
    counts = _counts(selected_sets, p)
    return FrequencyVector(pi_hat=counts / B, counts=counts, effective_B=B, gamma=0.0)


def _n_trim(gamma: float, B: int) -> int:
    # robust floor: 0.7 * 100 must give 70, not 69
    return int(np.floor(gamma * B + 1e-9))


def trim_set(losses, gamma: float, tie_seed: int) -> np.ndarray:
    """Indices of the ``floor(gamma * B)`` largest losses; ties at the cut drawn at random."""
    losses = np.asarray(losses, dtype=float)
    gamma = check_fraction(gamma, "gamma", closed_high=False)
    k = _n_trim(gamma, losses.shape[0])
    if k == 0:
        return np.empty(0, dtype=np.intp)
    keys = np.random.default_rng(tie_seed).random(losses.shape[0])
    order = np.lexsort((keys, -losses))
    return np.sort(order[:k]).astype(np.intp)


def trimmed_frequencies(selected_sets, losses, gamma: float, tie_seed: int,
                        p: int) -> FrequencyVector:
    selected_sets = list(selected_sets)
    B = len(selected_sets)
    if B == 0:
        raise ValueError("need at least one selected set")
    if len(losses) != B:
        raise ValueError(f"{len(losses)} losses for {B} selected sets")
    trimmed = trim_set(losses, gamma, tie_seed)
    if len(trimmed) >= B:
        raise ValueError("gamma trims every resample")
    drop = np.zeros(B, dtype=bool)
    drop[trimmed] = True
    kept = [s for s, d in zip(selected_sets, drop) if not d]
    counts = _counts(kept, p)
    eff = B - len(trimmed)
    return FrequencyVector(pi_hat=counts / eff, counts=counts, effective_B=eff, gamma=gamma)


def stable_set(freq: FrequencyVector, rule: StableRule, tie_seed: int) -> np.ndarray:
    """Stable variables (sorted, 0-based) under a threshold or rank rule."""
    if isinstance(rule, Threshold):
        return np.flatnonzero(freq.pi_hat >= rule.pi_thr - _THRESH_EPS).astype(np.intp)
    if isinstance(rule, Rank):
        if rule.q > freq.p:
            raise ValueError(f"q={rule.q} exceeds p={freq.p}")
        keys = np.random.default_rng(tie_seed).random(freq.p)
        order = np.lexsort((keys, -freq.counts))
        return np.sort(order[: rule.q]).astype(np.intp)
    raise TypeError(f"unknown rule {rule!r}")


def _tie_seeds(seed: int) -> tuple[int, int]:
    trim_seed, rank_seed = np.random.SeedSequence([int(seed), 7]).generate_state(2)
    return int(trim_seed), int(rank_seed)


def run_stability_selection(d, plan: ResamplePlan, sel_cfg: SelectorConfig | None,
                            rule: StableRule, gamma: float = 0.0, seed: int = 0,
                            selector: Callable | None = None) -> EnsembleRun:
    """Fit, score, trim, aggregate and select over all ``plan.B`` resamples.

    ``d`` is a :class:`Dataset` or an ``(X, y)`` pair. ``selector(X, y)`` may
    replace the built-in L1 path fit; it must return a :class:`SelectionResult`.
    """
    if isinstance(d, Dataset):
        X, y = d.X, d.y
    else:
        X, y = (np.asarray(a, dtype=float) for a in d)
    if X.shape[0] != plan.n:
        raise ValueError(f"plan is for n={plan.n} rows but data has {X.shape[0]}")
    fit = selector or (lambda Xb, yb: fit_l1_path(Xb, yb, sel_cfg))
    records = []
    for b in range(plan.B):
        idx = draw(plan, b)
        Xb, yb = X[idx.rows], y[idx.rows]
        res = fit(Xb, yb)
        records.append(ResampleRecord(idx, res, in_sample_loss(res, Xb, yb)))
    trim_seed, rank_seed = _tie_seeds(seed)
    sets = [r.result.selected for r in records]
    losses = [r.loss for r in records]
    freq = trimmed_frequencies(sets, losses, gamma, trim_seed, X.shape[1])
    trimmed = trim_set(losses, gamma, trim_seed)
    return EnsembleRun(
        per_resample=records,
        trimmed_set=trimmed,
        frequencies=freq,
        stable=stable_set(freq, rule, rank_seed),
        rule=rule,
        gamma=gamma,
    )


class StabilitySelection(SelectorMixin, BaseEstimator):
    """(Trimmed) Stability Selection as a scikit-learn feature selector.

    Parameters
    ----------
    n_resamples : int
        Number of resamples ``B``.
    n_sub : int or None
        Rows per resample; ``None`` uses ``n // 2``.
    resampling : {"subsample", "bootstrap"}
    gamma : float in [0, 1)
        Fraction of resample models with the largest in-sample loss to drop.
    q : int
        Size of the stable set for the rank rule (used when ``pi_thr`` is None).
    pi_thr : float or None
        Threshold rule; overrides ``q`` when given.
    target_nonzeros, lambda_grid_size, lambda_min_ratio :
        Settings of the L1 base selector.
    random_state : int
        Master seed for resampling and tie-breaking.
    """

    def __init__(self, n_resamples=100, n_sub=None, resampling="subsample", gamma=0.0, q=5,
                 pi_thr=None, target_nonzeros=7, lambda_grid_size=50, lambda_min_ratio=0.01,
                 random_state=0):
        self.n_resamples = n_resamples
        self.n_sub = n_sub
        self.resampling = resampling
        self.gamma = gamma
        self.q = q
        self.pi_thr = pi_thr
        self.target_nonzeros = target_nonzeros
        self.lambda_grid_size = lambda_grid_size
        self.lambda_min_ratio = lambda_min_ratio
        self.random_state = random_state

    def _rule(self) -> StableRule:
        return Threshold(self.pi_thr) if self.pi_thr is not None else Rank(self.q)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        n = X.shape[0]
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1)[0])
        n_sub = n // 2 if self.n_sub is None else self.n_sub
        plan = ResamplePlan(self.resampling, n, n_sub, self.n_resamples, int(seed))
        cfg = SelectorConfig(target_nonzeros=self.target_nonzeros,
                             lambda_grid_size=self.lambda_grid_size,
                             lambda_min_ratio=self.lambda_min_ratio)
        run = run_stability_selection((X, y), plan, cfg, self._rule(), self.gamma, int(seed))
        self.run_ = run
        self.frequencies_ = run.frequencies.pi_hat
        self.losses_ = run.losses
        self.trimmed_ = run.trimmed_set
        self.stable_set_ = run.stable
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "stable_set_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.stable_set_] = True
        return mask


class TrimmedStabilitySelection(StabilitySelection):
    """:class:`StabilitySelection` with trimming switched on by default."""

    def __init__(self, n_resamples=100, n_sub=None, resampling="subsample", gamma=0.5, q=5,
                 pi_thr=None, target_nonzeros=7, lambda_grid_size=50, lambda_min_ratio=0.01,
                 random_state=0):
        super().__init__(n_resamples=n_resamples, n_sub=n_sub, resampling=resampling,
                         gamma=gamma, q=q, pi_thr=pi_thr, target_nonzeros=target_nonzeros,
                         lambda_grid_size=lambda_grid_size, lambda_min_ratio=lambda_min_ratio,
                         random_state=random_state)
