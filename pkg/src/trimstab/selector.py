"""L1-penalised linear regression used as the per-resample variable selector.

The fit walks a geometric grid of penalties from ``lambda_max`` downwards with
warm-started cyclic coordinate descent and stops at the first penalty whose
active set reaches ``target_nonzeros``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_regression_data

# columns with standard deviation below this are treated as constant
_CONST_TOL = 1e-12


@dataclass(frozen=True)
class SelectorConfig:
    target_nonzeros: int = 7
    lambda_grid_size: int = 50
    lambda_min_ratio: float = 0.01
    max_iterations: int = 10000
    tolerance: float = 1e-7

    def __post_init__(self):
        if self.target_nonzeros < 1:
            raise ValueError("target_nonzeros must be >= 1")
        if self.lambda_grid_size < 1:
            raise ValueError("lambda_grid_size must be >= 1")
        if not 0.0 < self.lambda_min_ratio < 1.0:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    @classmethod
    def for_support_size(cls, s0: int, **kwargs) -> "SelectorConfig":
        """Defaults used throughout the simulations: ``target_nonzeros = s0 + 2``."""
        return cls(target_nonzeros=s0 + 2, **kwargs)


@dataclass
class SelectionResult:
    selected: np.ndarray  # sorted 0-based column indices
    coefficients: np.ndarray
    intercept: float
    lambda_: float = 0.0
    n_iter: int = 0
    extra: dict = field(default_factory=dict)

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.coefficients + self.intercept


@njit(cache=True)
def _cd_path(gram, xty, lambdas, target, max_iter, tol):
    """Coordinate descent over ``lambdas`` on standardised data (covariance form).

    ``gram`` is X'X/n with unit diagonal on non-constant columns and zero rows
    for constant ones; ``xty`` is X'y/n.  Returns (coef, grid index, sweeps).
    """
    p = xty.shape[0]
    beta = np.zeros(p)
    grad = xty.copy()  # X'(y - X beta)/n
    total = 0
    k = 0
    for k in range(lambdas.shape[0]):
        lam = lambdas[k]
        for it in range(max_iter):
            total += 1
            max_delta = 0.0
            for j in range(p):
                if gram[j, j] == 0.0:
                    continue
                rho = grad[j] + beta[j]
                if rho > lam:
                    new = rho - lam
                elif rho < -lam:
                    new = rho + lam
                else:
                    new = 0.0
                delta = new - beta[j]
                if delta != 0.0:
                    for i in range(p):
                        grad[i] -= gram[i, j] * delta
                    beta[j] = new
                    ad = abs(delta)
                    if ad > max_delta:
                        max_delta = ad
            if max_delta < tol:
                break
        active = 0
        for j in range(p):
            if beta[j] != 0.0:
                active += 1
        if active >= target:
            break
    return beta, k, total


def fit_l1_path(X, y, cfg: SelectorConfig | None = None) -> SelectionResult:
    """Fit the L1 path and return the selection at the first sufficiently dense penalty.

    Columns are centred and scaled to unit (population) variance; constant
    columns become the zero column and can never enter. Coefficients are
    reported on the original scale.
    """
    cfg = cfg or SelectorConfig()
    X, y = check_regression_data(X, y, min_rows=2)
    n, p = X.shape
    y_mean = float(y.mean())
    yc = y - y_mean
    x_mean = X.mean(axis=0)
    xc = X - x_mean
    scale = np.sqrt((xc * xc).mean(axis=0))
    live = scale > _CONST_TOL * np.maximum(1.0, np.abs(x_mean))
    xs = np.zeros_like(xc)
    xs[:, live] = xc[:, live] / scale[live]

    xty = xs.T @ yc / n
    lambda_max = float(np.max(np.abs(xty))) if p else 0.0
    if lambda_max <= 0.0:
        return SelectionResult(
            selected=np.empty(0, dtype=np.intp),
            coefficients=np.zeros(p),
            intercept=y_mean,
            lambda_=0.0,
        )
    gram = xs.T @ xs / n
    # exact unit diagonal for live columns, zero for constant ones
    np.fill_diagonal(gram, live.astype(float))
    lambdas = lambda_max * np.geomspace(1.0, cfg.lambda_min_ratio, cfg.lambda_grid_size)
    beta_std, k, sweeps = _cd_path(
        gram, xty, lambdas, cfg.target_nonzeros, cfg.max_iterations, cfg.tolerance
    )
    coef = np.zeros(p)
    coef[live] = beta_std[live] / scale[live]
    intercept = y_mean - float(x_mean @ coef)
    return SelectionResult(
        selected=np.flatnonzero(coef != 0.0),
        coefficients=coef,
        intercept=intercept,
        lambda_=float(lambdas[k]),
        n_iter=int(sweeps),
    )


def in_sample_loss(result: SelectionResult, X, y) -> float:
    """Mean squared residual of ``result`` over the supplied rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[1] != result.coefficients.shape[0]:
        raise ValueError(
            f"dimension mismatch: X {X.shape}, y {y.shape}, coef {result.coefficients.shape}"
        )
    resid = y - result.intercept - X @ result.coefficients
    return float(np.mean(resid * resid))


class L1Selector(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_l1_path`.

    Parameters mirror :class:`SelectorConfig`. After ``fit`` the estimator
    exposes ``coef_``, ``intercept_``, ``support_`` and ``lambda_``.
    """

    def __init__(self, target_nonzeros=7, lambda_grid_size=50, lambda_min_ratio=0.01,
                 max_iterations=10000, tolerance=1e-7):
        self.target_nonzeros = target_nonzeros
        self.lambda_grid_size = lambda_grid_size
        self.lambda_min_ratio = lambda_min_ratio
        self.max_iterations = max_iterations
        self.tolerance = tolerance

    def _config(self) -> SelectorConfig:
        return SelectorConfig(
            target_nonzeros=self.target_nonzeros,
            lambda_grid_size=self.lambda_grid_size,
            lambda_min_ratio=self.lambda_min_ratio,
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
        )

    def fit(self, X, y):
        res = fit_l1_path(X, y, self._config())
        self.result_ = res
        self.coef_ = res.coefficients
        self.intercept_ = res.intercept
        self.support_ = res.selected
        self.lambda_ = res.lambda_
        self.n_features_in_ = res.coefficients.shape[0]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return self.result_.predict(X)
