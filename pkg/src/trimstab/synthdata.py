"""Synthetic sparse regression data and contamination schemes.

Clean data: regressor entries i.i.d. N(5, 1), ``s0`` nonzero coefficients
i.i.d. N(4, 1) on the first ``s0`` columns, Gaussian noise whose variance is
the empirical variance of ``X @ beta`` divided by the requested SNR.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._validation import check_fraction, check_int


class Scheme(str, enum.Enum):
    COLUMN_ZERO_RELEVANT = "column_zero_relevant"
    CASE_WISE = "case_wise"
    CELL_WISE_RANDOM = "cell_wise_random"
    RESPONSE_ONLY = "response_only"


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    beta_true: np.ndarray
    support: np.ndarray  # 0-based relevant columns
    noise_sd: float
    seed: int | None = None
    contaminated_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    contamination: dict | None = None

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"rows(X)={self.X.shape[0]} differs from len(y)={self.y.shape[0]}")
        if self.beta_true.shape[0] != self.X.shape[1]:
            raise ValueError("beta_true length must equal the number of columns of X")
        if len(self.support) != int(np.count_nonzero(self.beta_true)):
            raise ValueError("support size must equal the number of nonzero coefficients")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def s0(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class ContaminationSpec:
    """How a dataset is contaminated.

    ``row_count`` rows are attacked for the row-based schemes; ``cell_rate``
    drives the random cell-wise scheme. Case-wise outliers are drawn from
    ``N(outlier_loc, outlier_scale ** 2)``; the other schemes write
    ``replacement_value``.
    """

    scheme: Scheme = Scheme.COLUMN_ZERO_RELEVANT
    row_count: int = 0
    cell_rate: float = 0.0
    replacement_value: float = 0.0
    target_columns: tuple | None = None
    outlier_loc: float = 0.0
    outlier_scale: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        check_int(self.row_count, "row_count", low=0)
        check_fraction(self.cell_rate, "cell_rate")
        if self.outlier_scale < 0:
            raise ValueError("outlier_scale must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "row_count": self.row_count,
            "cell_rate": self.cell_rate,
            "replacement_value": self.replacement_value,
            "target_columns": None if self.target_columns is None else list(self.target_columns),
            "outlier_loc": self.outlier_loc,
            "outlier_scale": self.outlier_scale,
        }


def generate_dataset(n: int, p: int, s0: int, snr: float, seed: int) -> Dataset:
    """Draw a clean dataset; ``snr=math.inf`` gives noiseless responses."""
    n = check_int(n, "n", low=2)
    p = check_int(p, "p", low=1)
    s0 = check_int(s0, "s0", low=1, high=p)
    snr = float(snr)
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    rng = np.random.default_rng(seed)
    X = rng.normal(5.0, 1.0, size=(n, p))
    beta = np.zeros(p)
    beta[:s0] = rng.normal(4.0, 1.0, size=s0)
    signal = X @ beta
    sigma = 0.0 if math.isinf(snr) else math.sqrt(float(np.var(signal)) / snr)
    y = signal + rng.normal(0.0, sigma, size=n)
    return Dataset(X=X, y=y, beta_true=beta, support=np.arange(s0), noise_sd=sigma, seed=seed)


def contaminate(d: Dataset, spec: ContaminationSpec, seed: int) -> Dataset:
    """Return a contaminated copy of ``d``; ``d`` itself is not modified."""
    n, p = d.X.shape
    if spec.row_count > n:
        raise ValueError(f"row_count={spec.row_count} exceeds n={n}")
    rng = np.random.default_rng(seed)
    X = d.X.copy()
    y = d.y.copy()
    scheme = spec.scheme
    if scheme is Scheme.CELL_WISE_RANDOM:
        mask = rng.random((n, p)) < spec.cell_rate
        X[mask] = spec.replacement_value
        rows = np.flatnonzero(mask.any(axis=1))
    else:
        rows = np.sort(rng.choice(n, size=spec.row_count, replace=False))
        if scheme is Scheme.COLUMN_ZERO_RELEVANT:
            cols = d.support if spec.target_columns is None else np.asarray(spec.target_columns)
            if cols.size and (cols.min() < 0 or cols.max() >= p):
                raise ValueError("target_columns out of range")
            X[np.ix_(rows, cols)] = spec.replacement_value
        elif scheme is Scheme.CASE_WISE:
            X[rows] = rng.normal(spec.outlier_loc, spec.outlier_scale, size=(len(rows), p))
            y[rows] = rng.normal(spec.outlier_loc, spec.outlier_scale, size=len(rows))
        elif scheme is Scheme.RESPONSE_ONLY:
            y[rows] = spec.replacement_value
    return replace(d, X=X, y=y, contaminated_rows=rows.astype(np.intp),
                   contamination={**spec.to_dict(), "seed": seed})


def count_contaminated_cells(original: Dataset, contaminated: Dataset) -> int:
    """Cells (regressors and response) whose values differ."""
    if original.X.shape != contaminated.X.shape or original.y.shape != contaminated.y.shape:
        raise ValueError(
            f"dimension mismatch: {original.X.shape} vs {contaminated.X.shape}"
        )
    return int(np.count_nonzero(original.X != contaminated.X)
               + np.count_nonzero(original.y != contaminated.y))


def contaminated_cell_fraction(original: Dataset, contaminated: Dataset) -> tuple[int, int]:
    """(outlying cells, total cells) with the response column included."""
    n, p = original.X.shape
    return count_contaminated_cells(original, contaminated), n * (p + 1)


def save_dataset(d: Dataset, path) -> tuple[Path, Path]:
    """Write ``path`` (CSV: x1..xp, y) and a JSON sidecar ``path.with_suffix('.json')``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(d.p)] + ["y"])
        for row, yi in zip(d.X, d.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(yi))])
    sidecar = path.with_suffix(".json")
    meta = {
        "n": d.n,
        "p": d.p,
        "beta_true": [float(v) for v in d.beta_true],
        "support": [int(v) for v in d.support],
        "noise_sd": d.noise_sd,
        "seed": d.seed,
        "contaminated_rows": [int(v) for v in d.contaminated_rows],
        "contamination": d.contamination,
    }
    sidecar.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return path, sidecar


def load_dataset(path) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    if not header or header[-1] != "y":
        raise ValueError(f"{path}: last column must be 'y'")
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    return Dataset(
        X=data[:, :-1],
        y=data[:, -1],
        beta_true=np.asarray(meta["beta_true"], dtype=float),
        support=np.asarray(meta["support"], dtype=np.intp),
        noise_sd=float(meta["noise_sd"]),
        seed=meta.get("seed"),
        contaminated_rows=np.asarray(meta.get("contaminated_rows", []), dtype=np.intp),
        contamination=meta.get("contamination"),
    )
