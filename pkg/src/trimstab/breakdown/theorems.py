"""Breakdown probabilities of (trimmed) Stability Selection.

A resample counts as *broken* when it carries enough contamination to break
the base selector. Stability Selection breaks down once more than ``K``
resamples are broken, where ``K`` depends on the stable-set rule and on the
clean-data selection frequencies. All ">" and ">=" comparisons are kept
exactly as in the underlying formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .._validation import check_fraction, check_int
from .laws import Binomial, MultivariateHypergeometric, Multinomial
from .query import BreakdownQuery, BreakdownResult, ceil_, floor_
from .resampling import resample_broken_prob

# above this many DP cell updates the cell-wise tails switch to Monte Carlo
EXACT_WORK_LIMIT = 10**8
DEFAULT_MC_SAMPLES = 200_000


def trimmed_breakdown_threshold(K, B: int, gamma: float, k_gamma: int,
                                special_half: bool = False) -> int:
    """Broken-model count replacing ``K`` once ``floor(gamma * B)`` models are trimmed.

    Threshold form: ``k_gamma + ceil((B - floor(gamma B)) * K / B)``.
    With ``special_half`` the input ``K`` is the un-halved gap count ``B * delta``
    of the rank rule and the result is ``k_gamma + ceil(0.5 * (B - floor(gamma B)) * K / B)``.
    """
    check_int(B, "B", low=1)
    check_fraction(gamma, "gamma", closed_high=False)
    n_trim = floor_(gamma * B)
    check_int(k_gamma, "k_gamma", low=0, high=n_trim)
    kept = B - n_trim
    factor = 0.5 if special_half else 1.0
    return int(k_gamma + ceil_(factor * kept * K / B))


def _binomial_exceed(B: int, p: float, K: int) -> float:
    """P(Bin(B, p) > K)."""
    return Binomial(B, min(max(p, 0.0), 1.0)).sf(K)


def _threshold_K(query: BreakdownQuery) -> tuple[int, list]:
    gap = query.max_pi_plus - query.pi_thr
    K_untrimmed = ceil_(query.B * gap)
    flags = []
    if query.gamma > 0 or query.k_gamma > 0:
        K = trimmed_breakdown_threshold(K_untrimmed, query.B, query.gamma, query.k_gamma)
        flags.append("trimmed")
    else:
        K = K_untrimmed
    return K, flags


def _rank_Ks(query: BreakdownQuery) -> tuple[int, int, list]:
    """(K for the full gap, K for the half gap, flags)."""
    delta = query.rank.gap()
    flags = []
    if query.gamma > 0 or query.k_gamma > 0:
        K_full = trimmed_breakdown_threshold(ceil_(query.B * delta), query.B, query.gamma,
                                             query.k_gamma)
        K_half = trimmed_breakdown_threshold(query.B * delta, query.B, query.gamma,
                                             query.k_gamma, special_half=True)
        flags += ["trimmed", "half_gap_adjustment_ambiguous"]
    else:
        K_full = ceil_(query.B * delta)
        K_half = ceil_(0.5 * query.B * delta)
    return K_full, K_half, flags


def _require(query, *names):
    missing = [nm for nm in names if getattr(query, nm) is None]
    if missing:
        raise ValueError(f"query is missing required field(s): {', '.join(missing)}")


def _p_star(query: BreakdownQuery, c=None, m=None) -> float:
    c = query.c if c is None else c
    m = query.m if m is None else m
    return resample_broken_prob(c, query.n_sub, m, query.n, query.resampling)


def prob_breakdown_threshold_case(query: BreakdownQuery) -> BreakdownResult:
    """Threshold rule, case-wise contamination; same for both scenarios."""
    _require(query, "max_pi_plus", "pi_thr")
    if query.max_pi_plus < query.pi_thr:
        return BreakdownResult(value=1.0, flags=["immediate_breakdown"])
    K, flags = _threshold_K(query)
    p_star = _p_star(query)
    return BreakdownResult(value=_binomial_exceed(query.B, p_star, K), K=K, flags=flags,
                           details={"p_star": p_star})


def _rank_check(query):
    _require(query, "rank")
    if not query.rank.standing_assumption() or query.rank.top_relevant_count() == 0:
        return BreakdownResult(value=1.0, interval=None, flags=["immediate_breakdown"])
    return None


def prob_breakdown_rank_case(query: BreakdownQuery) -> BreakdownResult:
    """Rank rule, case-wise contamination.

    Pessimistic: point value with the half gap. Optimistic: interval between
    the full-gap and half-gap probabilities.
    """
    bad = _rank_check(query)
    if bad is not None:
        if query.scenario == "optimistic":
            bad.interval, bad.value = (1.0, 1.0), None
        return bad
    K_full, K_half, flags = _rank_Ks(query)
    p_star = _p_star(query)
    hi = _binomial_exceed(query.B, p_star, K_half)
    details = {"p_star": p_star, "delta": query.rank.gap(), "s": query.rank.top_relevant_count(),
               "K_full": K_full, "K_half": K_half}
    if query.scenario == "pessimistic":
        return BreakdownResult(value=hi, K=K_half, flags=flags, details=details)
    lo = _binomial_exceed(query.B, p_star, K_full)
    return BreakdownResult(interval=(lo, hi), K=K_half, flags=flags, details=details)


@dataclass(frozen=True)
class CellTails:
    p1: float
    p2: float
    method: str
    std_err: tuple | None = None


def _cell_thresholds(query):
    prof = query.cell
    T1 = ceil_(query.c * query.n_sub * (prof.p + 1))
    T2 = ceil_(query.c * query.n_sub * prof.s0)
    return T1, T2


def cell_resample_tails(query: BreakdownQuery, mc_samples: int = DEFAULT_MC_SAMPLES,
                        seed: int = 0) -> CellTails:
    """Per-resample probabilities that the whole matrix (``p1``) resp. the relevant
    columns (``p2``) carry at least a ``c``-fraction of outlying cells."""
    prof = query.cell
    T1, T2 = _cell_thresholds(query)
    w1 = range(len(prof.category_counts))
    w2 = range(len(prof.relevant_counts))
    if query.resampling == "subsample":
        law1 = MultivariateHypergeometric(prof.category_counts, query.n_sub)
        law2 = MultivariateHypergeometric(prof.relevant_counts, query.n_sub)
    else:
        law1 = Multinomial.from_counts(query.n_sub, prof.category_counts)
        law2 = Multinomial.from_counts(query.n_sub, prof.relevant_counts)
    work = law1.state_size(T1) + law2.state_size(T2)
    if work <= EXACT_WORK_LIMIT:
        return CellTails(law1.weighted_tail(w1, T1), law2.weighted_tail(w2, T2), "exact")
    from .montecarlo import simulate_weight_sums

    cells, rel, _ = prof.row_arrays()
    s1 = simulate_weight_sums(cells, query.n_sub, query.resampling, mc_samples, seed)
    s2 = simulate_weight_sums(rel, query.n_sub, query.resampling, mc_samples, seed + 1)
    p1, p2 = float((s1 >= T1).mean()), float((s2 >= T2).mean())
    se = tuple(math.sqrt(max(v * (1 - v), 0.0) / mc_samples) for v in (p1, p2))
    return CellTails(p1, p2, "monte_carlo", se)


def _cell_degenerate(query: BreakdownQuery):
    """Shortcut outcomes that do not depend on resampling, or ``None``."""
    prof = query.cell
    rel_frac = sum(l * z for l, z in enumerate(prof.relevant_counts)) / (query.n * prof.s0)
    resp_frac = prof.response_outliers / query.n
    if rel_frac > query.c or resp_frac > query.c:
        return BreakdownResult(value=1.0, flags=["relevant_or_response_fraction_exceeds_c"])
    limit = floor_(query.c * (prof.p + 1))
    used = [l for l, z in enumerate(prof.category_counts) if z > 0]
    if max(used) <= limit:
        return BreakdownResult(value=0.0, flags=["all_rows_within_cell_bdp"])
    if min(used) > limit:
        return BreakdownResult(value=1.0, flags=["all_rows_beyond_cell_bdp"])
    return None


def _cell_components(query, K, mc_samples, seed):
    tails = cell_resample_tails(query, mc_samples, seed)
    p3 = _p_star(query, m=query.cell.response_outliers)
    comps = {
        "P1": _binomial_exceed(query.B, tails.p1, K),
        "P2": _binomial_exceed(query.B, tails.p2, K),
        "P3": _binomial_exceed(query.B, p3, K),
    }
    return comps, tails, p3


def _cell_result(query, K, flags, mc_samples, seed):
    comps, tails, p3 = _cell_components(query, K, mc_samples, seed)
    value = min(comps.values())
    res = BreakdownResult(value=value, K=K, flags=flags,
                          details={**comps, "p1": tails.p1, "p2": tails.p2, "p3": p3,
                                   "tail_method": tails.method})
    if tails.method == "monte_carlo":
        res.method = "monte_carlo"
        res.samples = mc_samples
        res.std_err = max(tails.std_err)
    return res


def prob_breakdown_threshold_cell(query: BreakdownQuery, mc_samples: int = DEFAULT_MC_SAMPLES,
                                  seed: int = 0) -> BreakdownResult:
    """Threshold rule, cell-wise contamination: ``min(P1, P2, P3)`` unless degenerate."""
    _require(query, "cell", "max_pi_plus", "pi_thr")
    if query.max_pi_plus < query.pi_thr:
        return BreakdownResult(value=1.0, flags=["immediate_breakdown"])
    deg = _cell_degenerate(query)
    if deg is not None:
        return deg
    K, flags = _threshold_K(query)
    return _cell_result(query, K, flags, mc_samples, seed)


def prob_breakdown_rank_cell(query: BreakdownQuery, mc_samples: int = DEFAULT_MC_SAMPLES,
                             seed: int = 0) -> BreakdownResult:
    """Rank rule, cell-wise contamination.

    Optimistic queries return ``[min of lower bounds, min of upper bounds]``
    over the three interval candidates; the realised probability lies in one
    of those intervals, flagged as ``realized_in_one_interval``.
    """
    _require(query, "cell")
    bad = _rank_check(query)
    if bad is not None:
        return bad
    deg = _cell_degenerate(query)
    if deg is not None:
        if query.scenario == "optimistic":
            deg.interval, deg.value = (deg.value, deg.value), None
        return deg
    K_full, K_half, flags = _rank_Ks(query)
    if query.scenario == "pessimistic":
        res = _cell_result(query, K_half, flags, mc_samples, seed)
        res.details.update(K_full=K_full, K_half=K_half, delta=query.rank.gap())
        return res
    hi = _cell_components(query, K_half, mc_samples, seed)
    lo = _cell_components(query, K_full, mc_samples, seed)
    comps_hi, tails, p3 = hi
    comps_lo = lo[0]
    intervals = {v: (comps_lo[v], comps_hi[v]) for v in ("P1", "P2", "P3")}
    interval = (min(i[0] for i in intervals.values()), min(i[1] for i in intervals.values()))
    res = BreakdownResult(interval=interval, K=K_half, flags=flags + ["realized_in_one_interval"],
                          details={"intervals": {k: list(v) for k, v in intervals.items()},
                                   "p1": tails.p1, "p2": tails.p2, "p3": p3,
                                   "K_full": K_full, "K_half": K_half,
                                   "delta": query.rank.gap(), "tail_method": tails.method})
    if tails.method == "monte_carlo":
        res.method = "monte_carlo"
        res.samples = mc_samples
        res.std_err = max(tails.std_err)
    return res


def breakdown_probability(query: BreakdownQuery, **kwargs) -> BreakdownResult:
    """Dispatch on (rule, case- vs cell-wise)."""
    if query.rule == "threshold":
        if query.cell is None:
            return prob_breakdown_threshold_case(query)
        return prob_breakdown_threshold_cell(query, **kwargs)
    if query.cell is None:
        return prob_breakdown_rank_case(query)
    return prob_breakdown_rank_cell(query, **kwargs)


@dataclass(frozen=True)
class StabBdp:
    fraction: float
    m: int | None
    reached: bool

    def __float__(self):
        return float(self.fraction)


def stab_bdp(query: BreakdownQuery, alpha: float, profile_for=None) -> StabBdp:
    """Smallest contamination fraction whose breakdown probability reaches ``alpha``.

    Case-wise queries scan the contaminated row count ``m = 0..n`` and report
    ``m / n``. Cell-wise queries need ``profile_for(k)`` returning the
    :class:`CellProfile` for ``k`` attacked units (``None`` ends the scan); the
    fraction is ``total cells / (n (p + 1))``. A zero probability never counts
    as breakdown, so ``alpha = 0`` yields the first ``m`` with positive probability.
    The breakdown probability (upper value for intervals) is used.
    """
    check_fraction(alpha, "alpha", closed_high=False)

    def hit(q):
        pr = breakdown_probability(q).upper
        return pr >= alpha and pr > 0.0

    if query.cell is None and profile_for is None:
        for m in range(query.n + 1):
            if hit(query.with_m(m)):
                return StabBdp(m / query.n, m, True)
        return StabBdp(1.0, None, False)
    if profile_for is None:
        raise ValueError("cell-wise stab_bdp needs profile_for")
    k = 0
    while True:
        prof = profile_for(k)
        if prof is None:
            return StabBdp(1.0, None, False)
        q = replace(query, cell=prof)
        if hit(q):
            cells = prof.total_cells
            return StabBdp(cells / (query.n * (prof.p + 1)), cells, True)
        k += 1


@dataclass(frozen=True)
class SurplusResult:
    value: float
    defined: bool
    numerator: float | None = None
    denominator: float | None = None
    mode: str = "probability_ratio"

    def __float__(self):
        return float(self.value)


def _evaluate_with_K(query: BreakdownQuery, K: int) -> float:
    """Breakdown probability of ``query`` with its broken-model count forced to ``K``."""
    if query.cell is None:
        return _binomial_exceed(query.B, _p_star(query), K)
    deg = _cell_degenerate(query)
    if deg is not None:
        return deg.value
    return min(_cell_components(query, K, DEFAULT_MC_SAMPLES, 0)[0].values())


def robustness_surplus(query: BreakdownQuery, mode: str = "probability_ratio",
                       alpha: float = 0.5) -> SurplusResult:
    """Robustness surplus of Stability Selection.

    Untrimmed queries compare with an aggregate that breaks as soon as one
    resample breaks (``K = 0``). Trimmed queries (``gamma > 0``) compare the
    trimmed procedure with its untrimmed counterpart. ``bdp_ratio`` divides
    the smallest breaking ``m`` of the numerator by that of the denominator.
    """
    mode = mode.replace("-", "_").lower()
    trimmed = query.gamma > 0 or query.k_gamma > 0

    def num_prob(q):
        res = breakdown_probability(q)
        return res.upper, res

    def den_prob(q):
        qb = replace(q, gamma=0.0, k_gamma=0)
        if trimmed:
            return breakdown_probability(qb).upper
        return _evaluate_with_K(qb, 0)

    if mode == "probability_ratio":
        num, res = num_prob(query)
        den = den_prob(query)
        if "immediate_breakdown" in res.flags or den == 0.0:
            return SurplusResult(math.nan, False, num, den, mode)
        return SurplusResult(num / den, True, num, den, mode)
    if mode == "bdp_ratio":
        if query.cell is not None:
            raise ValueError("bdp_ratio is defined for case-wise queries")
        check_fraction(alpha, "alpha", closed_high=False)

        def first_m(fn):
            for m in range(query.n + 1):
                if fn(query.with_m(m)) > alpha:
                    return m
            return None

        m_num = first_m(lambda q: num_prob(q)[0])
        m_den = first_m(den_prob)
        if m_num is None or m_den in (None, 0):
            return SurplusResult(math.nan, False, m_num, m_den, mode)
        return SurplusResult(m_num / m_den, True, m_num, m_den, mode)
    raise ValueError(f"mode must be 'probability_ratio' or 'bdp_ratio', got {mode!r}")
