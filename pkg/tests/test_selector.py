import itertools

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.linear_model import Lasso

from trimstab.selector import (
    L1Selector,
    SelectionResult,
    SelectorConfig,
    fit_l1_path,
    in_sample_loss,
)
from trimstab.synthdata import ContaminationSpec, contaminate, generate_dataset


def test_perfect_predictor():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 6))
    y = X[:, 3].copy()
    res = fit_l1_path(X, y, SelectorConfig(target_nonzeros=1))
    assert list(res.selected) == [3]


def test_selected_matches_nonzero_coefficients():
    d = generate_dataset(40, 10, 3, 5.0, 1)
    res = fit_l1_path(d.X, d.y)
    np.testing.assert_array_equal(res.selected, np.flatnonzero(res.coefficients))


def _best_subset(X, y, size):
    best, best_rss = None, np.inf
    n = X.shape[0]
    for s in itertools.combinations(range(X.shape[1]), size):
        A = np.column_stack([np.ones(n), X[:, s]])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        rss = np.sum((y - A @ coef) ** 2)
        if rss < best_rss:
            best, best_rss = set(s), rss
    return best


@pytest.mark.parametrize("seed", range(5))
def test_recovers_support_like_best_subset(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 5))
    beta = np.array([2.0, -1.5, 0, 0, 0])
    y = X @ beta + rng.normal(0, 0.1, size=20)
    res = fit_l1_path(X, y, SelectorConfig(target_nonzeros=2))
    oracle2 = _best_subset(X, y, 2)
    assert oracle2 == {0, 1}
    assert set(res.selected) >= oracle2
    res3 = fit_l1_path(X, y, SelectorConfig(target_nonzeros=3))
    assert set(res3.selected) >= {0, 1}
    assert _best_subset(X, y, 3) >= {0, 1}


def test_attacked_columns_are_never_selected():
    for seed in range(10):
        d = generate_dataset(50, 25, 5, 5.0, seed)
        c = contaminate(d, ContaminationSpec(row_count=50), seed=seed)
        res = fit_l1_path(c.X, c.y, SelectorConfig(target_nonzeros=15))
        assert not set(res.selected) & set(d.support)


def test_constant_response_gives_empty_selection():
    X = np.random.default_rng(1).normal(size=(10, 3))
    res = fit_l1_path(X, np.full(10, 2.5))
    assert res.selected.size == 0 and res.intercept == 2.5


def test_lambda_max_gives_empty_set():
    d = generate_dataset(30, 8, 3, 5.0, 2)
    res = fit_l1_path(d.X, d.y, SelectorConfig(lambda_grid_size=1))
    assert res.selected.size == 0
    assert in_sample_loss(res, d.X, d.y) == pytest.approx(np.var(d.y))


def test_active_set_grows_along_path():
    d = generate_dataset(60, 20, 5, 2.0, 3)
    sizes = [fit_l1_path(d.X, d.y, SelectorConfig(target_nonzeros=t)).selected.size
             for t in range(1, 12)]
    assert all(s >= t for s, t in zip(sizes, range(1, 12)))
    assert sizes == sorted(sizes)


def test_matches_sklearn_lasso_at_same_penalty():
    d = generate_dataset(60, 12, 4, 2.0, 4)
    res = fit_l1_path(d.X, d.y, SelectorConfig(target_nonzeros=6, tolerance=1e-12))
    xm, sd = d.X.mean(axis=0), d.X.std(axis=0)
    ref = Lasso(alpha=res.lambda_, tol=1e-14, max_iter=100_000)
    ref.fit((d.X - xm) / sd, d.y - d.y.mean())
    np.testing.assert_allclose(res.coefficients * sd, ref.coef_, atol=1e-6)
    np.testing.assert_allclose(res.intercept, d.y.mean() - xm @ res.coefficients)


def test_in_sample_loss_recomputes_mean_squared_residual():
    d = generate_dataset(25, 6, 2, 2.0, 5)
    res = fit_l1_path(d.X, d.y)
    direct = np.mean([(yi - res.intercept - xi @ res.coefficients) ** 2
                      for xi, yi in zip(d.X, d.y)])
    assert in_sample_loss(res, d.X, d.y) == pytest.approx(direct)


def test_in_sample_loss_exact_fit_is_zero():
    d = generate_dataset(15, 4, 4, np.inf, 6)
    res = SelectionResult(selected=np.arange(4), coefficients=d.beta_true, intercept=0.0)
    assert in_sample_loss(res, d.X, d.y) == pytest.approx(0.0, abs=1e-20)


def test_in_sample_loss_dimension_mismatch():
    res = SelectionResult(selected=np.array([], dtype=int), coefficients=np.zeros(3),
                          intercept=0.0)
    with pytest.raises(ValueError):
        in_sample_loss(res, np.zeros((4, 2)), np.zeros(4))


def test_config_validation():
    with pytest.raises(ValueError):
        SelectorConfig(tolerance=0)
    with pytest.raises(ValueError):
        SelectorConfig(lambda_min_ratio=1.0)
    assert SelectorConfig.for_support_size(5).target_nonzeros == 7


def test_deterministic():
    d = generate_dataset(40, 15, 5, 2.0, 8)
    a = fit_l1_path(d.X, d.y)
    b = fit_l1_path(d.X, d.y)
    assert a.coefficients.tobytes() == b.coefficients.tobytes()


def test_estimator_api():
    d = generate_dataset(40, 10, 3, 5.0, 9)
    est = L1Selector(target_nonzeros=3)
    assert est.get_params()["target_nonzeros"] == 3
    fitted = clone(est).fit(d.X, d.y)
    assert fitted.coef_.shape == (10,)
    assert fitted.predict(d.X).shape == (40,)
    assert fitted.support_.size >= 3
