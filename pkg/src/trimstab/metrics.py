"""True-positive scoring of stable sets against the true support."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class RunScore:
    tpr: float
    recovered: int
    s0: int
    false_positives: int

    @property
    def full_recovery(self) -> bool:
        return self.recovered == self.s0

    @property
    def total_miss(self) -> bool:
        return self.recovered == 0


@dataclass(frozen=True)
class Summary:
    mean_tpr_rate: float
    mean_tpr_count: float  # recovered relevant variables per run, 0..s0
    cases_tpr1: int
    cases_tpr0: int
    replications: int

    def to_dict(self) -> dict:
        return {
            "mean_tpr_count": self.mean_tpr_count,
            "mean_tpr_rate": self.mean_tpr_rate,
            "cases_tpr1": self.cases_tpr1,
            "cases_tpr0": self.cases_tpr0,
            "replications": self.replications,
        }


def score(stable, support) -> RunScore:
    support = {int(j) for j in support}
    if not support:
        raise ValueError("support must be nonempty")
    stable = {int(j) for j in stable}
    hit = len(stable & support)
    return RunScore(tpr=hit / len(support), recovered=hit, s0=len(support),
                    false_positives=len(stable - support))


def summarize(scores) -> Summary:
    scores = list(scores)
    if not scores:
        raise ValueError("need at least one score")
    # sum integer counts so the result does not depend on input order
    recovered = sum(s.recovered for s in scores)
    rate_sum = math.fsum(s.tpr for s in scores)
    return Summary(
        mean_tpr_rate=rate_sum / len(scores),
        mean_tpr_count=recovered / len(scores),
        cases_tpr1=sum(s.full_recovery for s in scores),
        cases_tpr0=sum(s.total_miss for s in scores),
        replications=len(scores),
    )
