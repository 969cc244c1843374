"""Reproducible bootstrap samples and subsamples of row indices.

Resample ``b`` of a plan is drawn from its own generator seeded with
``numpy.random.SeedSequence([master_seed, b])``, so every draw depends only on
``(master_seed, b)`` and never on how many other resamples were drawn before.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_int

KINDS = ("bootstrap", "subsample")


@dataclass(frozen=True)
class ResamplePlan:
    kind: str
    n: int
    n_sub: int
    B: int
    master_seed: int

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        check_int(self.n, "n", low=2)
        check_int(self.n_sub, "n_sub", low=1)
        if self.n_sub >= self.n:
            raise ValueError(f"n_sub must be < n, got n_sub={self.n_sub}, n={self.n}")
        check_int(self.B, "B", low=1)
        check_int(self.master_seed, "master_seed", low=0)


@dataclass(frozen=True)
class ResampleIndex:
    b: int
    rows: np.ndarray


def resample_seed(master_seed: int, b: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(b)])


def draw(plan: ResamplePlan, b: int) -> ResampleIndex:
    """Rows of resample ``b`` (0-based, ``0 <= b < B``)."""
    b = check_int(b, "b", low=0, high=plan.B - 1)
    rng = np.random.default_rng(resample_seed(plan.master_seed, b))
    if plan.kind == "bootstrap":
        rows = rng.integers(0, plan.n, size=plan.n_sub)
    else:
        rows = np.sort(rng.choice(plan.n, size=plan.n_sub, replace=False))
    return ResampleIndex(b=b, rows=rows.astype(np.intp))


def draw_all(plan: ResamplePlan) -> list[ResampleIndex]:
    return [draw(plan, b) for b in range(plan.B)]


def contaminated_count(idx: ResampleIndex, contaminated_rows) -> int:
    """Entries of ``idx.rows`` (with multiplicity) that lie in ``contaminated_rows``."""
    bad = np.asarray(list(contaminated_rows), dtype=np.intp)
    if bad.size == 0:
        return 0
    return int(np.isin(idx.rows, bad).sum())
