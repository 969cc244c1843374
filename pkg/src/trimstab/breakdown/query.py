"""Query and result records for the breakdown calculators."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .._validation import check_fraction, check_int

RESAMPLINGS = ("subsample", "bootstrap")
RULES = ("threshold", "rank")
SCENARIOS = ("pessimistic", "optimistic")

_ROUND_EPS = 1e-9


def ceil_(x: float) -> int:
    """Ceiling that ignores floating noise such as 100 * 0.2 = 20.000000000000004."""
    return math.ceil(x - _ROUND_EPS * max(1.0, abs(x)))


def floor_(x: float) -> int:
    return math.floor(x + _ROUND_EPS * max(1.0, abs(x)))


def normalize_resampling(kind: str) -> str:
    k = str(kind).lower()
    aliases = {"subsampling": "subsample", "subs": "subsample", "boot": "bootstrap",
               "bootstrapping": "bootstrap"}
    k = aliases.get(k, k)
    if k not in RESAMPLINGS:
        raise ValueError(f"resampling must be one of {RESAMPLINGS}, got {kind!r}")
    return k


@dataclass(frozen=True)
class RankContext:
    """Selection frequencies on the clean data for a rank rule with ``q`` stable variables.

    ``pi_plus`` holds the frequencies of all relevant variables, ``pi_minus``
    those of the non-relevant ones.
    """

    pi_plus: tuple
    pi_minus: tuple
    q: int

    def __post_init__(self):
        object.__setattr__(self, "pi_plus", tuple(float(v) for v in self.pi_plus))
        object.__setattr__(self, "pi_minus", tuple(float(v) for v in self.pi_minus))
        check_int(self.q, "q", low=1)
        if not self.pi_plus:
            raise ValueError("pi_plus needs at least one relevant variable")

    @classmethod
    def with_gap(cls, delta: float) -> "RankContext":
        """Smallest context whose frequency gap equals ``delta``."""
        return cls(pi_plus=(float(delta),), pi_minus=(0.0, 0.0), q=2)

    def standing_assumption(self) -> bool:
        # some relevant j is beaten by fewer than q-1 non-relevant variables
        minus = np.asarray(self.pi_minus)
        return any(int(np.sum(minus >= pj)) < self.q - 1 for pj in self.pi_plus)

    def top_relevant_count(self) -> int:
        """Relevant variables among the top ``q`` (ties resolved in favour of relevant ones)."""
        freqs = [(-v, 0) for v in self.pi_plus] + [(-v, 1) for v in self.pi_minus]
        freqs.sort()
        return sum(1 for _, tag in freqs[: self.q] if tag == 0)

    def gap(self) -> float:
        """max relevant frequency minus the q-th largest non-relevant frequency."""
        minus = sorted(self.pi_minus, reverse=True)
        minus += [0.0] * max(0, self.q - len(minus))
        return max(self.pi_plus) - minus[self.q - 1]


@dataclass(frozen=True)
class CellProfile:
    """Cell-wise contamination summary.

    ``category_counts[l]`` = number of rows with ``l`` outlying cells among
    the ``p + 1`` cells (regressors plus response); ``relevant_counts[l]`` =
    rows with ``l`` outlying cells among the ``s0`` relevant columns;
    ``response_outliers`` = rows whose response is contaminated.
    """

    category_counts: tuple
    relevant_counts: tuple
    response_outliers: int
    p: int
    s0: int

    def __post_init__(self):
        cc = tuple(int(check_int(v, "category count", low=0)) for v in self.category_counts)
        rc = tuple(int(check_int(v, "relevant count", low=0)) for v in self.relevant_counts)
        object.__setattr__(self, "category_counts", cc)
        object.__setattr__(self, "relevant_counts", rc)
        check_int(self.p, "p", low=1)
        check_int(self.s0, "s0", low=1, high=self.p)
        if len(cc) > self.p + 2:
            raise ValueError("category_counts has more than p + 2 entries")
        if len(rc) > self.s0 + 1:
            raise ValueError("relevant_counts has more than s0 + 1 entries")
        if sum(cc) != sum(rc):
            raise ValueError(
                f"inconsistent profile: category counts sum to {sum(cc)}, "
                f"relevant counts to {sum(rc)}"
            )
        check_int(self.response_outliers, "response_outliers", low=0, high=sum(cc))

    @property
    def n(self) -> int:
        return sum(self.category_counts)

    @property
    def total_cells(self) -> int:
        return sum(l * z for l, z in enumerate(self.category_counts))

    @classmethod
    def from_mask(cls, mask, relevant) -> "CellProfile":
        """Build from an ``n x (p + 1)`` boolean mask whose last column is the response."""
        mask = np.asarray(mask, dtype=bool)
        n, p1 = mask.shape
        p = p1 - 1
        rel = np.asarray(sorted(relevant), dtype=int)
        row_cells = mask.sum(axis=1)
        rel_cells = mask[:, rel].sum(axis=1)
        cc = np.bincount(row_cells, minlength=p + 2)
        rc = np.bincount(rel_cells, minlength=len(rel) + 1)
        return cls(tuple(cc), tuple(rc), int(mask[:, p].sum()), p, len(rel))

    def row_arrays(self):
        """Per-row (cells, relevant cells, response flag) consistent with the marginals.

        Only the marginals enter the formulas, so rows are laid out in
        category order.
        """
        cells = np.repeat(np.arange(len(self.category_counts)), self.category_counts)
        rel = np.repeat(np.arange(len(self.relevant_counts)), self.relevant_counts)
        resp = np.zeros(self.n, dtype=int)
        resp[: self.response_outliers] = 1
        return cells, rel, resp


@dataclass(frozen=True)
class BreakdownQuery:
    n: int
    n_sub: int
    B: int
    resampling: str = "subsample"
    c: float = 0.5
    m: int = 0
    rule: str = "threshold"
    scenario: str = "pessimistic"
    max_pi_plus: float | None = None
    pi_thr: float | None = None
    rank: RankContext | None = None
    cell: CellProfile | None = None
    gamma: float = 0.0
    k_gamma: int = 0

    def __post_init__(self):
        check_int(self.n, "n", low=1)
        check_int(self.n_sub, "n_sub", low=1)
        if self.n_sub >= self.n:
            raise ValueError(f"n_sub must be < n, got n_sub={self.n_sub}, n={self.n}")
        check_int(self.B, "B", low=1)
        object.__setattr__(self, "resampling", normalize_resampling(self.resampling))
        check_fraction(self.c, "c")
        check_int(self.m, "m", low=0, high=self.n)
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        check_fraction(self.gamma, "gamma", closed_high=False)
        check_int(self.k_gamma, "k_gamma", low=0, high=floor_(self.gamma * self.B))
        if self.cell is not None and self.cell.n != self.n:
            raise ValueError(
                f"inconsistent profile: rows in profile {self.cell.n} != n {self.n}"
            )

    def with_m(self, m: int) -> "BreakdownQuery":
        return replace(self, m=m)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BreakdownResult:
    value: float | None = None
    interval: tuple | None = None
    method: str = "exact"
    samples: int | None = None
    std_err: float | None = None
    K: int | None = None
    flags: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.interval is not None:
            lo, hi = self.interval
            if lo > hi + 1e-15:
                raise ValueError(f"interval bounds out of order: {self.interval}")

    @property
    def upper(self) -> float:
        return self.value if self.interval is None else self.interval[1]

    @property
    def lower(self) -> float:
        return self.value if self.interval is None else self.interval[0]

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["interval"] is not None:
            out["interval"] = list(out["interval"])
        return out
