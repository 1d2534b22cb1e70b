import numpy as np
import pytest

from bartcea.baselines import fit_ols, fit_sur


def test_noiseless_recovery():
    rng = np.random.default_rng(0)
    t = rng.integers(0, 2, 50).astype(float)
    x = rng.normal(size=50)
    fit = fit_ols(np.column_stack([t, x]), 3 + 2 * t + 5 * x, names=("t", "x"))
    np.testing.assert_allclose(fit.coefficients, [3, 2, 5], atol=1e-8)
    assert fit.column_names == ("(intercept)", "t", "x")
    assert fit.coef("t") == pytest.approx(2.0, abs=1e-8)


def test_matches_lstsq_and_variance_denominator():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=40)
    fit = fit_ols(X, y)
    A = np.column_stack([np.ones(40), X])
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    np.testing.assert_allclose(fit.coefficients, beta, atol=1e-12)
    r = y - A @ beta
    assert fit.residual_cov == pytest.approx(r @ r / (40 - 3 - 1))


def test_residuals_orthogonal():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 4))
    y = np.sin(X[:, 0]) + rng.normal(size=200)
    fit = fit_ols(X, y)
    A = np.column_stack([np.ones(200), X])
    assert np.max(np.abs(A.T @ (y - A @ fit.coefficients))) <= 1e-8


def test_rank_deficiency_names_columns():
    rng = np.random.default_rng(3)
    x = rng.normal(size=30)
    X = np.column_stack([x, 2 * x])
    with pytest.raises(np.linalg.LinAlgError, match="b"):
        fit_ols(X, rng.normal(size=30), names=("a", "b"))


def test_too_few_rows():
    with pytest.raises(ValueError):
        fit_ols(np.ones((2, 1)) * [[1.0], [2.0]], [1.0, 2.0])


def test_sur_equals_equationwise_ols():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(300, 3))
    Y = np.column_stack([X @ [1, 2, 3], X @ [-1, 0, 1]]) + rng.normal(size=(300, 2))
    sur = fit_sur(X, Y)
    for k in range(2):
        np.testing.assert_allclose(sur.coefficients[k], fit_ols(X, Y[:, k]).coefficients,
                                   rtol=0, atol=1e-10)


def test_sur_is_fixed_point_of_fgls():
    # one feasible-GLS step with the SUR covariance leaves shared-regressor estimates unchanged
    rng = np.random.default_rng(5)
    n = 250
    X = rng.normal(size=(n, 2))
    E = rng.multivariate_normal([0, 0], [[1.0, 0.6], [0.6, 2.0]], size=n)
    Y = np.column_stack([1 + X @ [1.0, -1.0], 2 + X @ [0.5, 0.3]]) + E
    sur = fit_sur(X, Y)
    A = np.column_stack([np.ones(n), X])
    Z = np.kron(np.eye(2), A)
    W = np.kron(np.linalg.inv(sur.residual_cov), np.eye(n))
    y = Y.T.ravel()
    beta_gls = np.linalg.solve(Z.T @ W @ Z, Z.T @ W @ y)
    np.testing.assert_allclose(beta_gls, sur.coefficients.ravel(), atol=1e-10)


def test_sur_independent_noise():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(5000, 2))
    Y = rng.normal(size=(5000, 2))
    assert abs(fit_sur(X, Y).residual_corr) <= 0.1


def test_sur_duplicated_outcome():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(100, 2))
    y = X @ [1.0, 1.0] + rng.normal(size=100)
    fit = fit_sur(X, np.column_stack([y, y]))
    assert fit.residual_corr == pytest.approx(1.0)
    cov = np.asarray(fit.residual_cov)
    np.testing.assert_allclose(cov, cov.T)
    assert np.all(np.linalg.eigvalsh(cov) >= -1e-12)


def test_sur_requires_complete_outcomes():
    X = np.arange(20.0)[:, None]
    Y = np.column_stack([np.arange(20.0), np.r_[np.nan, np.arange(19.0)]])
    with pytest.raises(ValueError, match="complete"):
        fit_sur(X, Y)
