"""Breakdown of resampling aggregates: bagging, bragging and the resampling BDP."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .._validation import check_fraction, check_int
from .laws import Binomial, Hypergeometric
from .query import ceil_, floor_, normalize_resampling


def _m_from_eps(eps: float, n: int) -> int:
    m = eps * n
    if abs(m - round(m)) > 1e-9 * max(1.0, m):
        raise ValueError(f"eps * n must be an integer for subsampling, got {m}")
    return int(round(m))


def resample_broken_prob(c: float, n_sub: int, m: int, n: int, resampling: str) -> float:
    """Probability that one resample carries at least ``ceil(c * n_sub)`` contaminated rows.

    With ``m`` of ``n`` rows contaminated: the hypergeometric form counts
    clean rows, the binomial form contaminated draws.
    """
    resampling = normalize_resampling(resampling)
    check_fraction(c, "c")
    check_int(m, "m", low=0, high=n)
    if resampling == "subsample":
        return Hypergeometric(n, n - m, n_sub).cdf(floor_((1.0 - c) * n_sub))
    return Binomial(n_sub, m / n).sf(ceil_(c * n_sub) - 1)


def _broken_prob_eps(c, n_sub, eps, resampling, n):
    resampling = normalize_resampling(resampling)
    check_fraction(eps, "eps")
    if resampling == "subsample":
        if n is None:
            raise ValueError("subsampling needs n")
        return resample_broken_prob(c, n_sub, _m_from_eps(eps, n), n, resampling)
    return Binomial(n_sub, eps).sf(ceil_(c * n_sub) - 1)


def _one_minus_pow(p: float, B: int) -> float:
    # 1 - (1 - p)^B without cancellation for small p
    if p >= 1.0:
        return 1.0
    return -math.expm1(B * math.log1p(-p))


def prob_resample_overrun(c, n_sub, B, eps, resampling="bootstrap", n=None) -> float:
    """Probability that at least one of ``B`` resamples is contaminated beyond ``c``."""
    check_int(B, "B", low=1)
    return _one_minus_pow(_broken_prob_eps(c, n_sub, eps, resampling, n), B)


@dataclass(frozen=True)
class BdpValue:
    """Smallest breaking contamination fraction found by a scan."""

    fraction: float
    m: int | None
    reached: bool

    def __float__(self):
        return float(self.fraction)


def resampling_bdp(c, n_sub, B, alpha, resampling="bootstrap", n=None) -> BdpValue:
    """Smallest eps in {0, 1/n, ..., 1} whose overrun probability exceeds ``alpha``."""
    check_fraction(alpha, "alpha", closed_high=False)
    if n is None:
        raise ValueError("the grid {0, 1/n, ..., 1} needs n")
    check_int(n, "n", low=1)
    for m in range(n + 1):
        if prob_resample_overrun(c, n_sub, B, m / n, resampling, n) > alpha:
            return BdpValue(m / n, m, True)
    return BdpValue(1.0, None, False)


def prob_bagging_bounded_breakdown(c, n_sub, B, eps, resampling="bootstrap", n=None,
                                   aggregation="mean") -> float:
    """Breakdown probability of a bagged estimator on a bounded domain.

    ``mean``: every one of the ``B`` resamples must break. ``median``: at
    least ``floor((B + 1) / 2)`` of them.
    """
    check_int(B, "B", low=1)
    p = _broken_prob_eps(c, n_sub, eps, resampling, n)
    agg = str(aggregation).lower()
    if agg == "mean":
        return p ** B
    if agg == "median":
        need = (B + 1) // 2
        return Binomial(B, p).sf(need - 1)
    raise ValueError(f"aggregation must be 'mean' or 'median', got {aggregation!r}")


def vsbdp_upper_bound(q_true: int, k: int, p: int, predictor_only: bool = False) -> float:
    """Universal cell-wise VSBDP bound ``min(q, k) / (p + k)``.

    Zeroing the ``q`` relevant columns or the ``k`` response columns removes
    every relevant variable, whichever is cheaper. With ``predictor_only`` the
    response cannot be attacked and the bound is ``q / (p + k)``.
    """
    check_int(p, "p", low=1)
    check_int(q_true, "q_true", low=0, high=p)
    check_int(k, "k", low=1)
    if predictor_only:
        return q_true / (p + k)
    return min(q_true, k) / (p + k)
