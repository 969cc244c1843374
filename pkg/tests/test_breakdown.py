import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimstab.breakdown import (
    Binomial,
    BreakdownQuery,
    CellProfile,
    RankContext,
    breakdown_probability,
    monte_carlo_bagging,
    monte_carlo_overrun,
    prob_bagging_bounded_breakdown,
    prob_breakdown_rank_case,
    prob_breakdown_rank_cell,
    prob_breakdown_threshold_case,
    prob_breakdown_threshold_cell,
    prob_resample_overrun,
    resample_broken_prob,
    resampling_bdp,
    robustness_surplus,
    stab_bdp,
    trimmed_breakdown_threshold,
    vsbdp_upper_bound,
)
from trimstab.breakdown.theorems import cell_resample_tails


def small_query(**kw):
    base = dict(n=4, n_sub=2, B=2, resampling="subsample", c=0.5, m=2,
                max_pi_plus=1.0, pi_thr=0.5)
    base.update(kw)
    return BreakdownQuery(**base)


def enumerated_25_36():
    # rows 0, 1 contaminated; a subsample of 2 breaks with >= ceil(0.5 * 2) = 1 of them
    subsets = list(itertools.combinations(range(4), 2))
    broken = [any(r < 2 for r in s) for s in subsets]
    p_star = sum(broken) / len(subsets)
    both = sum(a and b for a, b in itertools.product(broken, repeat=2)) / len(subsets) ** 2
    return p_star, both


# resampling-level quantities

def test_overrun_constants():
    assert prob_resample_overrun(0.5, 100, 100, 0.45, "bootstrap") >= 1 - 1e-6
    assert prob_resample_overrun(0.5, 100, 100, 0.0, "bootstrap") == 0.0
    assert prob_resample_overrun(1.0, 1, 1, 0.3, "bootstrap") == pytest.approx(0.3)
    assert prob_resample_overrun(0.7, 1, 1, 0.3, "bootstrap") == pytest.approx(0.3)


def test_overrun_subsample_matches_enumeration():
    p_star, _ = enumerated_25_36()
    assert resample_broken_prob(0.5, 2, 2, 4, "subsample") == pytest.approx(p_star)
    assert prob_resample_overrun(0.5, 2, 3, 0.5, "subsample", n=4) == pytest.approx(
        1 - (1 - p_star) ** 3)


def test_resampling_bdp_first_positive_step():
    r = resampling_bdp(0.5, 10, 5, 0.0, "bootstrap", n=20)
    assert r.reached and r.fraction == pytest.approx(1 / 20)


def test_resampling_bdp_remark_bound():
    r = resampling_bdp(0.5, 100, 100, 0.99, "bootstrap", n=200)
    assert r.reached and r.fraction <= 0.45


def test_resampling_bdp_matches_simulation():
    n, n_sub, B, c, alpha = 10, 5, 3, 0.4, 0.5
    r = resampling_bdp(c, n_sub, B, alpha, "bootstrap", n=n)
    assert r.reached
    m = r.m
    above = monte_carlo_overrun(c, n_sub, B, m, n, "bootstrap", trials=200_000, seed=1)
    below = monte_carlo_overrun(c, n_sub, B, m - 1, n, "bootstrap", trials=200_000, seed=2)
    assert above.value + 3 * above.std_err > alpha
    assert below.value - 3 * below.std_err <= alpha


def test_resampling_bdp_never_reached():
    # c = 1 with n_sub = 5 needs all draws contaminated; alpha close to 1 stays out of reach
    # only at eps = 1, where the probability is exactly 1
    r = resampling_bdp(1.0, 5, 1, 0.999999, "bootstrap", n=10)
    assert r.m == 10
    r = resampling_bdp(0.5, 3, 1, 0.0, "subsample", n=4)
    assert r.m == 2


def test_bagging_trivial_cases():
    for agg in ("mean", "median"):
        assert prob_bagging_bounded_breakdown(0.5, 10, 5, 0.0, aggregation=agg) == 0.0
    a = prob_bagging_bounded_breakdown(0.5, 10, 1, 0.3, aggregation="mean")
    b = prob_bagging_bounded_breakdown(0.5, 10, 1, 0.3, aggregation="median")
    assert a == pytest.approx(b)


@pytest.mark.parametrize("B", [2, 3, 5, 10])
@pytest.mark.parametrize("eps", [0.1, 0.3, 0.5, 0.7])
@pytest.mark.parametrize("kind", ["bootstrap", "subsample"])
def test_mean_aggregation_at_most_median(B, eps, kind):
    mean = prob_bagging_bounded_breakdown(0.4, 6, B, eps, kind, n=10, aggregation="mean")
    med = prob_bagging_bounded_breakdown(0.4, 6, B, eps, kind, n=10, aggregation="median")
    assert mean <= med + 1e-15


def test_vsbdp_bound():
    # one response column is cheaper to zero than five relevant columns
    assert vsbdp_upper_bound(5, 1, 25) == pytest.approx(1 / 26)
    assert vsbdp_upper_bound(5, 1, 25, predictor_only=True) == pytest.approx(5 / 26)
    assert vsbdp_upper_bound(0, 3, 10) == 0.0
    assert vsbdp_upper_bound(5, 10, 45) == pytest.approx(1 / 11)


# threshold rule, case-wise

def test_threshold_case_enumerated():
    p_star, both = enumerated_25_36()
    assert both == pytest.approx(25 / 36)
    res = prob_breakdown_threshold_case(small_query())
    assert res.K == 1
    assert res.details["p_star"] == pytest.approx(p_star)
    assert res.value == pytest.approx(25 / 36, abs=1e-14)
    assert res.method == "exact" and res.std_err is None


def test_threshold_case_K_example():
    q = BreakdownQuery(n=200, n_sub=100, B=100, m=10, max_pi_plus=0.9, pi_thr=0.7)
    assert prob_breakdown_threshold_case(q).K == 20


def test_threshold_case_clean_and_scenarios():
    assert prob_breakdown_threshold_case(small_query(m=0)).value == 0.0
    a = prob_breakdown_threshold_case(small_query(scenario="optimistic")).value
    b = prob_breakdown_threshold_case(small_query(scenario="pessimistic")).value
    assert a == b


def test_threshold_case_immediate_breakdown():
    res = prob_breakdown_threshold_case(small_query(max_pi_plus=0.4))
    assert res.value == 1.0 and "immediate_breakdown" in res.flags


def test_missing_fields_are_named():
    with pytest.raises(ValueError, match="pi_thr"):
        prob_breakdown_threshold_case(small_query(pi_thr=None))
    with pytest.raises(ValueError, match="rank"):
        prob_breakdown_rank_case(small_query(rule="rank"))


def test_query_validation():
    with pytest.raises(ValueError):
        small_query(n_sub=4)
    with pytest.raises(ValueError):
        small_query(m=5)
    with pytest.raises(ValueError):
        small_query(gamma=0.2, B=10, k_gamma=3)
    with pytest.raises(ValueError):
        CellProfile((3, 2), (4,), 0, p=2, s0=1)


@given(st.integers(20, 60), st.sampled_from(["bootstrap", "subsample"]),
       st.integers(1, 30), st.floats(0.05, 0.5))
@settings(max_examples=25, deadline=None)
def test_threshold_case_monotone_in_m(n, kind, B, gap):
    q = BreakdownQuery(n=n, n_sub=n // 2, B=B, resampling=kind, c=0.3, max_pi_plus=0.9,
                       pi_thr=0.9 - gap)
    vals = [prob_breakdown_threshold_case(q.with_m(m)).value for m in range(n + 1)]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


# rank rule, case-wise

def test_rank_case_composed_instance():
    q = small_query(B=4, rule="rank", rank=RankContext.with_gap(0.5), max_pi_plus=None,
                    pi_thr=None)
    res = prob_breakdown_rank_case(q)
    assert res.K == 1
    assert res.value == pytest.approx(Binomial(4, 5 / 6).sf(1))


def test_rank_case_clean():
    q = small_query(m=0, B=4, rule="rank", rank=RankContext.with_gap(0.5))
    assert prob_breakdown_rank_case(q).value == 0.0
    opt = prob_breakdown_rank_case(replace(q, scenario="optimistic"))
    assert opt.interval == (0.0, 0.0)


def test_rank_standing_assumption():
    ctx = RankContext(pi_plus=(0.3, 0.2), pi_minus=(0.9, 0.8, 0.7), q=2)
    assert not ctx.standing_assumption()
    q = small_query(rule="rank", rank=ctx)
    res = prob_breakdown_rank_case(q)
    assert res.value == 1.0 and "immediate_breakdown" in res.flags


def test_rank_context_gap_and_top_relevant():
    ctx = RankContext(pi_plus=(0.9, 0.6, 0.1), pi_minus=(0.7, 0.3, 0.2), q=3)
    assert ctx.top_relevant_count() == 2
    assert ctx.gap() == pytest.approx(0.9 - 0.2)


@given(st.integers(1, 200), st.floats(0.01, 1.0), st.integers(0, 40),
       st.sampled_from(["bootstrap", "subsample"]))
@settings(max_examples=60, deadline=None)
def test_optimistic_interval_contains_pessimistic(B, delta, m, kind):
    q = BreakdownQuery(n=40, n_sub=20, B=B, resampling=kind, c=0.4, m=m, rule="rank",
                       rank=RankContext.with_gap(delta))
    pes = prob_breakdown_rank_case(q)
    opt = prob_breakdown_rank_case(replace(q, scenario="optimistic"))
    lo, hi = opt.interval
    assert lo <= pes.value + 1e-15
    assert hi == pytest.approx(pes.value, abs=1e-15)


# cell-wise

def tiny_cell_mask():
    # n = 5 rows, p = 2 regressors plus the response; two categories (0 and 2 cells)
    mask = np.zeros((5, 3), dtype=bool)
    mask[3, [1, 2]] = True
    mask[4, [0, 1]] = True
    return mask


def test_cell_p1_matches_subset_enumeration():
    mask = tiny_cell_mask()
    prof = CellProfile.from_mask(mask, relevant=[0])
    assert prof.category_counts == (3, 0, 2, 0)
    q = BreakdownQuery(n=5, n_sub=2, B=3, c=0.5, max_pi_plus=1.0, pi_thr=0.5, cell=prof)
    tails = cell_resample_tails(q)
    cells = mask.sum(axis=1)
    rel = mask[:, [0]].sum(axis=1)
    subsets = list(itertools.combinations(range(5), 2))
    assert len(subsets) == 10
    p1 = np.mean([cells[list(s)].sum() >= 3 for s in subsets])
    p2 = np.mean([rel[list(s)].sum() >= 1 for s in subsets])
    assert tails.method == "exact"
    assert tails.p1 == pytest.approx(p1)
    assert tails.p2 == pytest.approx(p2)


def test_cell_threshold_composed_min():
    prof = CellProfile.from_mask(tiny_cell_mask(), relevant=[0])
    q = BreakdownQuery(n=5, n_sub=2, B=3, c=0.5, max_pi_plus=1.0, pi_thr=0.5, cell=prof)
    res = prob_breakdown_threshold_cell(q)
    tails = cell_resample_tails(q)
    K = 2
    p3 = resample_broken_prob(0.5, 2, prof.response_outliers, 5, "subsample")
    expect = min(Binomial(3, tails.p1).sf(K), Binomial(3, tails.p2).sf(K),
                 Binomial(3, p3).sf(K))
    assert res.K == K
    assert res.value == pytest.approx(expect)


def test_cell_clean_profile_is_zero():
    prof = CellProfile((10,), (10,), 0, p=4, s0=2)
    q = BreakdownQuery(n=10, n_sub=5, B=10, c=0.3, max_pi_plus=1.0, pi_thr=0.6, cell=prof)
    assert prob_breakdown_threshold_cell(q).value == 0.0
    qr = replace(q, rule="rank", rank=RankContext.with_gap(0.5))
    assert prob_breakdown_rank_cell(qr).value == 0.0


def test_cell_relevant_fraction_above_c_is_one():
    # c~ = 0.2; 5 of 20 relevant cells contaminated (fraction 0.25)
    mask = np.zeros((10, 6), dtype=bool)
    mask[:5, 0] = True
    prof = CellProfile.from_mask(mask, relevant=[0, 1])
    q = BreakdownQuery(n=10, n_sub=5, B=10, c=0.2, max_pi_plus=1.0, pi_thr=0.6, cell=prof)
    assert prob_breakdown_threshold_cell(q).value == 1.0
    qr = replace(q, rule="rank", rank=RankContext.with_gap(0.5))
    assert prob_breakdown_rank_cell(qr).value == 1.0


def test_cell_all_rows_beyond_bdp_is_one():
    prof = CellProfile((0, 0, 6), (6, 0), 0, p=1, s0=1)
    q = BreakdownQuery(n=6, n_sub=3, B=5, c=0.5, max_pi_plus=1.0, pi_thr=0.5, cell=prof)
    assert prob_breakdown_threshold_cell(q).value == 1.0


def test_rank_cell_optimistic_interval():
    prof = CellProfile.from_mask(tiny_cell_mask(), relevant=[0])
    q = BreakdownQuery(n=5, n_sub=2, B=6, c=0.5, rule="rank", scenario="optimistic",
                       rank=RankContext.with_gap(0.5), cell=prof)
    res = prob_breakdown_rank_cell(q)
    lo, hi = res.interval
    assert lo <= hi
    assert "realized_in_one_interval" in res.flags
    pes = prob_breakdown_rank_cell(replace(q, scenario="pessimistic"))
    assert hi == pytest.approx(pes.value)


def test_cell_bootstrap_uses_multinomial():
    prof = CellProfile.from_mask(tiny_cell_mask(), relevant=[0])
    q = BreakdownQuery(n=5, n_sub=2, B=3, resampling="bootstrap", c=0.5, max_pi_plus=1.0,
                       pi_thr=0.5, cell=prof)
    tails = cell_resample_tails(q)
    cells = tiny_cell_mask().sum(axis=1)
    pairs = list(itertools.product(range(5), repeat=2))
    p1 = np.mean([cells[list(s)].sum() >= 3 for s in pairs])
    assert tails.p1 == pytest.approx(p1)


def test_cell_falls_back_to_monte_carlo(monkeypatch):
    from trimstab.breakdown import theorems

    monkeypatch.setattr(theorems, "EXACT_WORK_LIMIT", 0)
    prof = CellProfile.from_mask(tiny_cell_mask(), relevant=[0])
    q = BreakdownQuery(n=5, n_sub=2, B=3, c=0.5, max_pi_plus=1.0, pi_thr=0.5, cell=prof)
    res = prob_breakdown_threshold_cell(q, mc_samples=50_000)
    assert res.method == "monte_carlo" and res.std_err is not None
    monkeypatch.setattr(theorems, "EXACT_WORK_LIMIT", 10 ** 8)
    exact = prob_breakdown_threshold_cell(q)
    assert abs(res.value - exact.value) < 4 * res.std_err + 1e-3


# trimming adjustment

def test_trimmed_threshold_example():
    assert trimmed_breakdown_threshold(20, 100, 0.2, 20) == 36
    assert trimmed_breakdown_threshold(20, 100, 0.2, 0) == 16
    for K in range(0, 50, 7):
        assert trimmed_breakdown_threshold(K, 100, 0.0, 0) == K


def test_trimmed_threshold_rejects_bad_k_gamma():
    with pytest.raises(ValueError):
        trimmed_breakdown_threshold(20, 100, 0.2, 21)


def test_trimmed_query_uses_adjusted_K():
    q = BreakdownQuery(n=200, n_sub=100, B=100, m=60, max_pi_plus=0.9, pi_thr=0.7,
                       gamma=0.2, k_gamma=20)
    res = prob_breakdown_threshold_case(q)
    assert res.K == 36 and "trimmed" in res.flags
    p = res.details["p_star"]
    assert res.value == pytest.approx(Binomial(100, p).sf(36))


def test_trimmed_rank_flags_ambiguity():
    q = BreakdownQuery(n=40, n_sub=20, B=100, m=10, rule="rank",
                       rank=RankContext.with_gap(0.4), gamma=0.2, k_gamma=5)
    res = prob_breakdown_rank_case(q)
    assert "half_gap_adjustment_ambiguous" in res.flags
    assert res.K == 5 + 16


# Stab-BDP and surplus

def test_stab_bdp_alpha_zero_is_first_positive():
    q = BreakdownQuery(n=30, n_sub=15, B=20, c=0.4, max_pi_plus=0.9, pi_thr=0.6)
    r = stab_bdp(q, 0.0)
    first = next(m for m in range(31) if prob_breakdown_threshold_case(q.with_m(m)).value > 0)
    assert r.m == first and r.fraction == pytest.approx(first / 30)


def test_stab_bdp_matches_direct_inversion_bootstrap():
    for B, gap, alpha in [(10, 0.2, 0.1), (20, 0.3, 0.5), (50, 0.1, 0.9)]:
        q = BreakdownQuery(n=40, n_sub=20, B=B, resampling="bootstrap", c=0.3,
                           max_pi_plus=0.9, pi_thr=0.9 - gap)
        K = int(np.ceil(B * gap - 1e-9))
        direct = None
        for m in range(41):
            p = Binomial(20, m / 40).sf(int(np.ceil(0.3 * 20 - 1e-9)) - 1)
            if Binomial(B, p).sf(K) >= alpha and Binomial(B, p).sf(K) > 0:
                direct = m
                break
        assert stab_bdp(q, alpha).m == direct


def test_stab_bdp_nonincreasing_in_alpha_direction():
    q = BreakdownQuery(n=40, n_sub=20, B=30, c=0.3, max_pi_plus=0.9, pi_thr=0.7)
    ms = [stab_bdp(q, a).m for a in np.linspace(0.0, 0.95, 12)]
    assert all(b >= a for a, b in zip(ms, ms[1:]))


def test_stab_bdp_cellwise_scan():
    n, p = 10, 3

    def profile_for(k):
        if k > n:
            return None
        mask = np.zeros((n, p + 1), dtype=bool)
        mask[:k, 0] = True
        return CellProfile.from_mask(mask, relevant=[0, 1])

    q = BreakdownQuery(n=n, n_sub=5, B=5, c=0.4, max_pi_plus=1.0, pi_thr=0.6,
                       cell=profile_for(0))
    r = stab_bdp(q, 0.5, profile_for=profile_for)
    assert r.reached and 0 < r.fraction <= 1


def test_surplus_K_zero_is_one():
    q = BreakdownQuery(n=40, n_sub=20, B=10, c=0.3, m=8, max_pi_plus=0.8, pi_thr=0.8)
    s = robustness_surplus(q)
    assert s.defined and s.value == pytest.approx(1.0)


def test_surplus_matches_two_calls():
    q = BreakdownQuery(n=40, n_sub=20, B=10, c=0.3, m=10, max_pi_plus=0.9, pi_thr=0.6)
    num = prob_breakdown_threshold_case(q).value
    den = prob_breakdown_threshold_case(replace(q, pi_thr=0.9)).value
    s = robustness_surplus(q)
    assert s.value == pytest.approx(num / den)
    assert 0.0 <= s.value <= 1.0


def test_surplus_undefined_when_denominator_zero():
    q = BreakdownQuery(n=40, n_sub=20, B=10, c=0.3, m=0, max_pi_plus=0.9, pi_thr=0.6)
    s = robustness_surplus(q)
    assert not s.defined


def test_surplus_trimmed_uses_adjusted_numerator():
    q = BreakdownQuery(n=200, n_sub=100, B=100, c=0.3, m=60, max_pi_plus=0.9, pi_thr=0.7,
                       gamma=0.2, k_gamma=20)
    s = robustness_surplus(q)
    p = resample_broken_prob(0.3, 100, 60, 200, "subsample")
    assert s.numerator == pytest.approx(Binomial(100, p).sf(36))
    assert s.denominator == pytest.approx(Binomial(100, p).sf(20))


def test_surplus_bdp_ratio():
    q = BreakdownQuery(n=40, n_sub=20, B=20, resampling="bootstrap", c=0.3,
                       max_pi_plus=0.9, pi_thr=0.6)
    s = robustness_surplus(q, mode="bdp_ratio", alpha=0.5)
    assert s.defined and s.value >= 1.0


def test_dispatcher_routes():
    prof = CellProfile.from_mask(tiny_cell_mask(), relevant=[0])
    q = BreakdownQuery(n=5, n_sub=2, B=3, c=0.5, max_pi_plus=1.0, pi_thr=0.5)
    assert breakdown_probability(q).value == prob_breakdown_threshold_case(q).value
    qc = replace(q, cell=prof)
    assert breakdown_probability(qc).value == prob_breakdown_threshold_cell(qc).value


def test_bagging_matches_simulation():
    for agg in ("mean", "median"):
        exact = prob_bagging_bounded_breakdown(0.4, 5, 3, 0.3, "bootstrap", n=10,
                                               aggregation=agg)
        mc = monte_carlo_bagging(0.4, 5, 3, 3, 10, "bootstrap", agg, trials=100_000, seed=5)
        assert abs(mc.value - exact) <= 3 * mc.std_err + 1e-12
