"""Exact and simulated breakdown probabilities for resampling-based selection."""
from .laws import Binomial, Hypergeometric, Multinomial, MultivariateHypergeometric, cdf, pmf
from .montecarlo import monte_carlo_bagging, monte_carlo_breakdown, monte_carlo_overrun
from .query import BreakdownQuery, BreakdownResult, CellProfile, RankContext
from .resampling import (
    BdpValue,
    prob_bagging_bounded_breakdown,
    prob_resample_overrun,
    resample_broken_prob,
    resampling_bdp,
    vsbdp_upper_bound,
)
from .theorems import (
    StabBdp,
    SurplusResult,
    breakdown_probability,
    prob_breakdown_rank_case,
    prob_breakdown_rank_cell,
    prob_breakdown_threshold_case,
    prob_breakdown_threshold_cell,
    robustness_surplus,
    stab_bdp,
    trimmed_breakdown_threshold,
)

__all__ = [
    "Binomial", "Hypergeometric", "Multinomial", "MultivariateHypergeometric", "cdf", "pmf",
    "monte_carlo_bagging", "monte_carlo_breakdown", "monte_carlo_overrun",
    "BreakdownQuery", "BreakdownResult", "CellProfile", "RankContext",
    "BdpValue", "prob_bagging_bounded_breakdown", "prob_resample_overrun",
    "resample_broken_prob", "resampling_bdp", "vsbdp_upper_bound",
    "StabBdp", "SurplusResult", "breakdown_probability", "prob_breakdown_rank_case",
    "prob_breakdown_rank_cell", "prob_breakdown_threshold_case",
    "prob_breakdown_threshold_cell", "robustness_surplus", "stab_bdp",
    "trimmed_breakdown_threshold",
]
