"""Seemingly unrelated BART for a bivariate (cost, health) outcome.

Two sum-of-trees ensembles share a bivariate normal error with covariance
``Sigma``.  A Gibbs sweep:

1. draws every missing outcome cell from its conditional normal given the
   observed cell of the same row, both ensemble fits and ``Sigma`` (rows
   with both cells missing are drawn jointly);
2. backfits ensemble 1 on the cost outcome adjusted for the current health
   residual, ``y1 - (S12 / S22) * (y2 - f2)``, with error variance
   ``S11 - S12**2 / S22``, then ensemble 2 symmetrically;
3. draws ``Sigma`` from its inverse-Wishart full conditional given the
   bivariate residual matrix.

Outcomes are rescaled column-wise to [-0.5, 0.5] using the observed cells;
all returned draws are on the original scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bart import BartConfig, Forest, _check_design, _check_test, _Scaling, draw_sigma2, sigma_prior_scale


@dataclass(frozen=True)
class SubartConfig(BartConfig):
    """BART settings plus the inverse-Wishart prior on the error covariance.

    The prior scale is the diagonal of the observed (rescaled) outcome
    variances, so with ``sigma_df = 4`` the prior mean of ``Sigma`` equals
    that diagonal.  ``diagonal_sigma`` forces uncorrelated errors, in which
    case each variance gets the univariate BART prior.
    """

    sigma_df: float = 4.0
    diagonal_sigma: bool = False

    def __post_init__(self):
        super().__post_init__()
        if self.sigma_df <= 3:
            raise ValueError("sigma_df must exceed 3 for a finite prior mean")


@dataclass
class SubartPosterior:
    """Kept draws with layout (row, outcome, draw); outcome 0 is cost."""

    y_hat_train: np.ndarray
    y_hat_test: np.ndarray
    sigma_draws: np.ndarray
    acceptance: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    y_completed: np.ndarray | None = None

    @property
    def n_kept(self) -> int:
        return self.sigma_draws.shape[0]

    @property
    def y_hat_test_mean(self) -> np.ndarray:
        return self.y_hat_test.mean(axis=2)

    def correlation_draws(self) -> np.ndarray:
        s = self.sigma_draws
        return s[:, 0, 1] / np.sqrt(s[:, 0, 0] * s[:, 1, 1])


def sample_sigma(
    residuals: np.ndarray,
    prior_df: float,
    prior_scale: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw the error covariance from IW(prior_df + n, prior_scale + R'R)."""
    residuals = np.asarray(residuals, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(residuals)):
        raise ValueError("residuals contain non-finite values")
    scale = np.asarray(prior_scale, dtype=float) + residuals.T @ residuals
    draw = stats.invwishart.rvs(df=prior_df + residuals.shape[0], scale=scale, random_state=rng)
    return 0.5 * (draw + draw.T)


def impute_missing(
    Y: np.ndarray,
    mask: np.ndarray,
    fit: np.ndarray,
    sigma: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Return a copy of ``Y`` with masked cells drawn from their conditionals.

    Observed cells are copied unchanged.
    """
    out = np.array(Y, dtype=float)
    only0 = mask[:, 0] & ~mask[:, 1]
    only1 = mask[:, 1] & ~mask[:, 0]
    both = mask[:, 0] & mask[:, 1]
    for miss, obs, rows in ((0, 1, only0), (1, 0, only1)):
        idx = np.flatnonzero(rows)
        if idx.size:
            slope = sigma[miss, obs] / sigma[obs, obs]
            var = sigma[miss, miss] - slope * sigma[miss, obs]
            mean = fit[idx, miss] + slope * (out[idx, obs] - fit[idx, obs])
            out[idx, miss] = mean + math.sqrt(max(var, 0.0)) * rng.standard_normal(idx.size)
    idx = np.flatnonzero(both)
    if idx.size:
        chol = np.linalg.cholesky(sigma)
        out[idx] = fit[idx] + rng.standard_normal((idx.size, 2)) @ chol.T
    return out


def fit_subart(X, Y, X_test=None, config: SubartConfig = SubartConfig(), missing_mask=None) -> SubartPosterior:
    """Fit the bivariate model.

    ``Y`` is n x 2 (cost, health).  Missing cells are given by
    ``missing_mask`` or, if omitted, by NaN entries of ``Y``; they are
    imputed within the sampler under a missing-at-random assumption.
    """
    X = _check_design(X, "X")
    Y = np.array(Y, dtype=float)
    n = X.shape[0]
    if Y.shape != (n, 2):
        raise ValueError("Y must be n x 2")
    if n < 2:
        raise ValueError("need at least two observations")
    mask = np.isnan(Y) if missing_mask is None else np.asarray(missing_mask, dtype=bool)
    if mask.shape != Y.shape:
        raise ValueError("missing_mask must match Y")
    if not np.all(np.isfinite(Y[~mask])):
        raise ValueError("observed outcomes contain non-finite values")
    for j in range(2):
        if (~mask[:, j]).sum() < 2:
            raise ValueError(f"outcome column {j} has fewer than two observed values")
    X_test = _check_test(X_test, X)

    scales = [_Scaling.of(Y[~mask[:, j], j]) for j in range(2)]
    span = np.array([s.span for s in scales])
    Ys = np.column_stack([scales[j].forward(Y[:, j]) for j in range(2)])
    Ys[mask] = 0.0
    obs_var = np.array([np.var(Ys[~mask[:, j], j], ddof=1) for j in range(2)])
    prior_scale = np.diag(obs_var)
    lams = [sigma_prior_scale(Ys[~mask[:, j], j], config.nu, config.q) for j in range(2)]

    m = config.n_tree
    tau2 = (0.5 / (config.k * math.sqrt(m))) ** 2
    rng = np.random.default_rng(config.seed)
    forests = []
    for j in range(2):
        col_mean = float(Ys[~mask[:, j], j].mean())
        Ys[mask[:, j], j] = col_mean
        forests.append(Forest(X, m, col_mean / m, config))
    sigma = prior_scale.copy()

    n_kept = config.n_kept
    train = np.empty((n, 2, n_kept))
    test = np.empty((X_test.shape[0], 2, n_kept))
    sig = np.empty((n_kept, 2, 2))
    acc = np.empty((config.n_mcmc, 2))
    for it in range(config.n_mcmc):
        fit = np.column_stack([forests[0].fit, forests[1].fit])
        if mask.any():
            Ys = impute_missing(Ys, mask, fit, sigma, rng)
        for j, o in ((0, 1), (1, 0)):
            slope = sigma[j, o] / sigma[o, o]
            cond_var = sigma[j, j] - slope * sigma[j, o]
            target = Ys[:, j] - slope * (Ys[:, o] - forests[o].fit)
            acc[it, j] = forests[j].sweep(target, cond_var, tau2, rng) / m
        resid = Ys - np.column_stack([forests[0].fit, forests[1].fit])
        if config.diagonal_sigma:
            sigma = np.diag([draw_sigma2(resid[:, j], config.nu, lams[j], rng) for j in range(2)])
        else:
            sigma = sample_sigma(resid, config.sigma_df, prior_scale, rng)
        s = it - config.n_burn
        if s >= 0:
            for j in range(2):
                train[:, j, s] = scales[j].backward(forests[j].predict(X))
                test[:, j, s] = scales[j].backward(forests[j].predict(X_test))
            sig[s] = sigma * np.outer(span, span)

    completed = Y.copy()
    for j in range(2):
        completed[mask[:, j], j] = scales[j].backward(Ys[mask[:, j], j])
    return SubartPosterior(train, test, sig, acc, completed)
