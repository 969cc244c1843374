"""Monte-Carlo counterparts of the exact breakdown formulas.

The simulation draws actual row indices (uniform subsets or bootstrap
draws), so it shares no code with the closed-form route it is checked
against.
"""
from __future__ import annotations

import math

import numpy as np

from .query import BreakdownQuery, BreakdownResult, ceil_, normalize_resampling
from .theorems import _cell_degenerate, _rank_check, _rank_Ks, _threshold_K

_CHUNK_ROWS = 2_000_000


def _draw_rows(rng, n, n_sub, count, resampling):
    if resampling == "bootstrap":
        return rng.integers(0, n, size=(count, n_sub))
    keys = rng.random((count, n))
    return np.argpartition(keys, n_sub - 1, axis=1)[:, :n_sub]


def simulate_weight_sums(weights, n_sub, resampling, samples, seed):
    """Sum of per-row ``weights`` over ``samples`` independent resamples."""
    weights = np.asarray(weights)
    n = weights.shape[0]
    resampling = normalize_resampling(resampling)
    rng = np.random.default_rng(seed)
    out = np.empty(samples, dtype=weights.dtype)
    per = max(1, _CHUNK_ROWS // max(n, n_sub))
    for start in range(0, samples, per):
        cnt = min(per, samples - start)
        rows = _draw_rows(rng, n, n_sub, cnt, resampling)
        out[start:start + cnt] = weights[rows].sum(axis=1)
    return out


def simulate_broken_counts(weights, threshold, n_sub, B, resampling, trials, seed):
    """Number of broken resamples (weight sum >= ``threshold``) among ``B``, per trial."""
    sums = simulate_weight_sums(weights, n_sub, resampling, trials * B, seed)
    return (sums.reshape(trials, B) >= threshold).sum(axis=1)


def _estimate(hits, trials):
    p = float(np.mean(hits))
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def _case_weights(query):
    w = np.zeros(query.n, dtype=np.int64)
    w[: query.m] = 1
    return w


def monte_carlo_breakdown(query: BreakdownQuery, trials: int = 100_000,
                          seed: int = 0) -> BreakdownResult:
    """Simulate the resampling process behind ``query``.

    A resample is broken when it holds at least ``ceil(c n_sub)`` contaminated
    rows (case-wise), or at least ``ceil(c n_sub (p + 1))`` outlying cells,
    ``ceil(c n_sub s0)`` relevant outlying cells, ``ceil(c n_sub)`` response
    outliers (cell-wise, one estimate per route; the minimum is reported).
    The trial breaks down when more than ``K`` resamples are broken.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    B, n_sub = query.B, query.n_sub

    if query.rule == "threshold":
        if query.max_pi_plus is None or query.pi_thr is None:
            raise ValueError("query is missing required field(s): max_pi_plus, pi_thr")
        if query.max_pi_plus < query.pi_thr:
            return BreakdownResult(value=1.0, method="monte_carlo", samples=trials,
                                   std_err=0.0, flags=["immediate_breakdown"])
        K, flags = _threshold_K(query)
        Ks = {"point": K}
    else:
        bad = _rank_check(query)
        if bad is not None:
            bad.method, bad.samples, bad.std_err = "monte_carlo", trials, 0.0
            return bad
        K_full, K_half, flags = _rank_Ks(query)
        Ks = {"point": K_half} if query.scenario == "pessimistic" else {"lo": K_full,
                                                                       "hi": K_half}
        K = K_half

    if query.cell is None:
        routes = {"case": (_case_weights(query), ceil_(query.c * n_sub))}
    else:
        deg = _cell_degenerate(query)
        if deg is not None:
            deg.method, deg.samples, deg.std_err = "monte_carlo", trials, 0.0
            if query.rule == "rank" and query.scenario == "optimistic":
                deg.interval, deg.value = (deg.value, deg.value), None
            return deg
        prof = query.cell
        cells, rel, resp = prof.row_arrays()
        routes = {
            "P1": (cells, ceil_(query.c * n_sub * (prof.p + 1))),
            "P2": (rel, ceil_(query.c * n_sub * prof.s0)),
            "P3": (resp, ceil_(query.c * n_sub)),
        }

    estimates = {}
    for i, (name, (weights, thr)) in enumerate(routes.items()):
        broken = simulate_broken_counts(weights, thr, n_sub, B, query.resampling, trials,
                                        seed + 7919 * i)
        estimates[name] = {key: _estimate(broken > k, trials) for key, k in Ks.items()}

    def pick(key):
        best = min(estimates.values(), key=lambda e: e[key][0])
        return best[key]

    details = {name: {k: v[0] for k, v in e.items()} for name, e in estimates.items()}
    if "point" in Ks:
        value, se = pick("point")
        return BreakdownResult(value=value, method="monte_carlo", samples=trials, std_err=se,
                               K=K, flags=flags, details=details)
    lo, se_lo = pick("lo")
    hi, se_hi = pick("hi")
    return BreakdownResult(interval=(lo, hi), method="monte_carlo", samples=trials,
                           std_err=max(se_lo, se_hi), K=K, flags=flags, details=details)


def monte_carlo_bagging(c, n_sub, B, m, n, resampling="bootstrap", aggregation="mean",
                        trials=100_000, seed=0) -> BreakdownResult:
    """Simulated breakdown of bagging (all ``B`` broken) or bragging (a majority broken)."""
    resampling = normalize_resampling(resampling)
    w = np.zeros(n, dtype=np.int64)
    w[:m] = 1
    broken = simulate_broken_counts(w, ceil_(c * n_sub), n_sub, B, resampling, trials, seed)
    need = B if aggregation == "mean" else (B + 1) // 2
    value, se = _estimate(broken >= need, trials)
    return BreakdownResult(value=value, method="monte_carlo", samples=trials, std_err=se)


def monte_carlo_overrun(c, n_sub, B, m, n, resampling="bootstrap", trials=100_000,
                        seed=0) -> BreakdownResult:
    """Simulated probability that at least one resample is broken."""
    w = np.zeros(n, dtype=np.int64)
    w[:m] = 1
    broken = simulate_broken_counts(w, ceil_(c * n_sub), n_sub, B,
                                    normalize_resampling(resampling), trials, seed)
    value, se = _estimate(broken > 0, trials)
    return BreakdownResult(value=value, method="monte_carlo", samples=trials, std_err=se)
