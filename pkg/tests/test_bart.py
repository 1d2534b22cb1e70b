import numpy as np
import pytest
from scipy.special import ndtr

from bartcea.bart import (
    BartConfig,
    BartPosterior,
    draw_latent,
    estimate_ps,
    fit_bart,
    fit_probit_bart,
    sigma_prior_scale,
)

FAST = BartConfig(n_tree=50, n_mcmc=400, n_burn=100, seed=3)


@pytest.fixture(scope="module")
def linear_data():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, 500)
    return x, 2 * x + 0.1 * rng.normal(size=500)


@pytest.fixture(scope="module")
def linear_fit(linear_data):
    x, y = linear_data
    return fit_bart(x[:, None], y, x[:, None], BartConfig(n_mcmc=1100, n_burn=100, seed=1))


def test_shapes_and_finiteness(linear_fit, linear_data):
    n = linear_data[0].size
    assert linear_fit.y_hat_train.shape == (n, 1000)
    assert linear_fit.y_hat_test.shape == (n, 1000)
    assert linear_fit.sigma2_draws.shape == (1000,)
    assert np.all(np.isfinite(linear_fit.y_hat_train))
    assert np.all(linear_fit.sigma2_draws > 0)


def test_recovers_line(linear_fit, linear_data):
    x, y = linear_data
    truth = 2 * x
    rmse = np.sqrt(np.mean((linear_fit.y_hat_train_mean - truth) ** 2))
    assert rmse <= 0.15
    # least squares knows the functional form; BART should not be far behind it
    beta = np.polyfit(x, y, 1)
    ols_rmse = np.sqrt(np.mean((np.polyval(beta, x) - truth) ** 2))
    assert rmse <= ols_rmse + 0.1
    assert np.sqrt(np.mean(linear_fit.sigma2_draws)) == pytest.approx(0.1, rel=0.25)


def test_test_equals_train_on_same_rows(linear_fit):
    np.testing.assert_array_equal(linear_fit.y_hat_test, linear_fit.y_hat_train)


def test_acceptance_rate_windows(linear_fit):
    windows = linear_fit.acceptance.reshape(-1, 100).mean(axis=1)
    assert np.all(windows > 0) and np.all(windows < 1)


def test_pure_noise_shrinks():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(300, 3))
    y = rng.normal(size=300)
    post = fit_bart(X, y, config=FAST)
    assert np.var(post.y_hat_train_mean) <= 0.2 * np.var(y)


def test_deterministic():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(80, 2))
    y = X[:, 0] + rng.normal(size=80)
    a = fit_bart(X, y, X[:5], FAST)
    b = fit_bart(X, y, X[:5], FAST)
    assert a.y_hat_train.tobytes() == b.y_hat_train.tobytes()
    assert a.y_hat_test.tobytes() == b.y_hat_test.tobytes()
    assert a.sigma2_draws.tobytes() == b.sigma2_draws.tobytes()


@pytest.mark.parametrize("a, b", [(2.0, 0.0), (0.25, 0.0), (1.0, 16.0), (4.0, -64.0)])
def test_scale_equivariance(a, b):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 2))
    y = np.round(8 * (X[:, 0] ** 2 + rng.normal(size=60))) / 8  # dyadic values keep affine maps exact
    base = fit_bart(X, y, config=FAST)
    moved = fit_bart(X, a * y + b, config=FAST)
    np.testing.assert_allclose(moved.y_hat_train, a * base.y_hat_train + b, rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(moved.sigma2_draws, a * a * base.sigma2_draws, rtol=1e-12)


def test_input_validation():
    X = np.arange(10.0)[:, None]
    with pytest.raises(ValueError, match="constant"):
        fit_bart(X, np.ones(10), config=FAST)
    with pytest.raises(ValueError):
        fit_bart(X, np.r_[np.nan, np.arange(9.0)], config=FAST)
    with pytest.raises(ValueError):
        fit_bart(np.r_[[[np.inf]], X[1:]], np.arange(10.0), config=FAST)
    with pytest.raises(ValueError):
        fit_bart(X, np.arange(10.0), np.ones((3, 2)), FAST)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_burn=10, n_mcmc=10), dict(n_tree=0), dict(alpha=1.0), dict(beta=-1.0),
     dict(move_probs=(0.5, 0.5, 0.5))],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        BartConfig(**kwargs)


def test_sigma_prior_quantile():
    from scipy import stats

    ys = np.random.default_rng(6).normal(size=100)
    lam = sigma_prior_scale(ys, 3.0, 0.9)
    # P(sigma^2 < var(ys)) = 0.9 under sigma^2 ~ nu lam / chi2_nu
    p = stats.chi2.sf(3.0 * lam / np.var(ys, ddof=1), 3.0)
    assert p == pytest.approx(0.9)


# ---------------------------------------------------------------- probit


def test_latent_truncation_respected():
    rng = np.random.default_rng(7)
    fit = np.array([-40.0, -5.0, 0.0, 5.0, 40.0] * 200)
    for t_val in (0, 1):
        t = np.full(fit.size, t_val)
        for _ in range(20):
            z = draw_latent(fit, t, rng)
            assert np.all(np.isfinite(z))
            assert np.all(z > 0) if t_val else np.all(z <= 0)


def test_latent_moments():
    rng = np.random.default_rng(8)
    z = draw_latent(np.zeros(200_000), np.ones(200_000, dtype=int), rng)
    # half-normal mean sqrt(2 / pi)
    assert z.mean() == pytest.approx(np.sqrt(2 / np.pi), abs=0.01)


def test_estimate_ps_examples():
    zero = BartPosterior(np.zeros((3, 4)), np.empty((0, 4)), None)
    np.testing.assert_array_equal(estimate_ps(zero), 0.5)
    split = BartPosterior(np.array([[-40.0, 40.0]]), np.empty((0, 2)), None)
    assert estimate_ps(split)[0] == pytest.approx(0.5)
    extreme = BartPosterior(np.array([[-60.0, -60.0], [60.0, 60.0]]), np.empty((0, 2)), None)
    ps = estimate_ps(extreme)
    assert np.all((ps > 0) & (ps < 1))


def test_probit_prevalence():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(1000, 2))
    t = rng.binomial(1, 0.3, 1000)
    post = fit_probit_bart(X, t, BartConfig(n_tree=50, n_mcmc=600, n_burn=100, seed=2))
    ps = estimate_ps(post)
    assert abs(ps.mean() - 0.3) <= 0.05
    assert np.all((ps > 0) & (ps < 1))
    assert post.sigma2_draws is None


def test_probit_tracks_logistic_score():
    rng = np.random.default_rng(10)
    x = rng.normal(size=500)
    true_ps = 1 / (1 + np.exp(-3 * x))
    t = rng.binomial(1, true_ps)
    post = fit_probit_bart(x[:, None], t, BartConfig(n_tree=50, n_mcmc=700, n_burn=200, seed=4))
    rmse = np.sqrt(np.mean((estimate_ps(post) - true_ps) ** 2))
    assert rmse <= 0.15


def test_probit_test_predictions_and_determinism():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(100, 1))
    t = (X[:, 0] + rng.normal(size=100) > 0).astype(int)
    a = fit_probit_bart(X, t, FAST, X_test=X)
    b = fit_probit_bart(X, t, FAST, X_test=X)
    np.testing.assert_array_equal(a.y_hat_test, a.y_hat_train)
    assert a.y_hat_train.tobytes() == b.y_hat_train.tobytes()
    assert np.all(np.isfinite(ndtr(a.y_hat_train)))


def test_probit_validation():
    X = np.arange(10.0)[:, None]
    with pytest.raises(ValueError, match="single class"):
        fit_probit_bart(X, np.zeros(10), FAST)
    with pytest.raises(ValueError):
        fit_probit_bart(X, np.arange(10), FAST)
