"""Univariate BART: continuous outcomes and probit (binary) outcomes.

Both samplers share :class:`Forest`, which owns the tree arrays and the
per-tree leaf assignment of every training row, and performs one Bayesian
backfitting sweep at a time.  Each tree update is a Metropolis-Hastings
structural move followed by conjugate normal draws of all its leaf values.

Hyperparameters follow the standard BART defaults: leaf prior
sd ``0.5 / (k sqrt(m))`` on an outcome rescaled to [-0.5, 0.5] (``3 / (k
sqrt(m))`` on the latent scale for probit), depth prior ``alpha (1 + d) **
-beta`` with alpha=0.95 and beta=2, and a scaled inverse chi-square prior
on the error variance with nu=3 that puts the sample sd of the outcome at
its 0.90 quantile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats
from scipy.special import log_ndtr, ndtr, ndtri_exp

from .tree import (
    ABSENT,
    DEFAULT_MAX_DEPTH,
    DEFAULT_MOVE_PROBS,
    LEAF,
    RegressionTree,
    SplitCandidates,
    TreeEnsemble,
    _apply_move,
    _descends,
    _predict_forest,
    _propose,
    _route,
    capacity,
)


@dataclass(frozen=True)
class BartConfig:
    n_tree: int = 100
    n_mcmc: int = 5000
    n_burn: int = 1000
    k: float = 2.0
    alpha: float = 0.95
    beta: float = 2.0
    nu: float = 3.0
    q: float = 0.90
    seed: int | None = 0
    max_depth: int = DEFAULT_MAX_DEPTH
    move_probs: tuple[float, float, float] = DEFAULT_MOVE_PROBS

    def __post_init__(self):
        if self.n_tree < 1:
            raise ValueError("n_tree must be at least 1")
        if not 0 <= self.n_burn < self.n_mcmc:
            raise ValueError("need 0 <= n_burn < n_mcmc")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.k <= 0 or self.nu <= 0 or not 0 < self.q < 1:
            raise ValueError("k, nu must be positive and q in (0, 1)")
        if abs(sum(self.move_probs) - 1.0) > 1e-12 or min(self.move_probs) <= 0:
            raise ValueError("move probabilities must be positive and sum to one")

    @property
    def n_kept(self) -> int:
        return self.n_mcmc - self.n_burn


@dataclass
class BartPosterior:
    """Kept draws; rows index observations, columns index draws."""

    y_hat_train: np.ndarray
    y_hat_test: np.ndarray
    sigma2_draws: np.ndarray | None = None
    acceptance: np.ndarray = field(default_factory=lambda: np.empty(0))
    latent: bool = False

    @property
    def n_kept(self) -> int:
        return self.y_hat_train.shape[1]

    @property
    def y_hat_train_mean(self) -> np.ndarray:
        return self.y_hat_train.mean(axis=1)

    @property
    def y_hat_test_mean(self) -> np.ndarray:
        return self.y_hat_test.mean(axis=1)


# ---------------------------------------------------------------------------
# backfitting kernels


@numba.njit(cache=True)
def _leaf_loglik(n, s, sigma2, tau2):
    # log marginal likelihood of a leaf, up to terms shared by both trees
    return -0.5 * math.log(1.0 + n * tau2 / sigma2) + 0.5 * tau2 * s * s / (sigma2 * (sigma2 + n * tau2))


@numba.njit(cache=True)
def _subtree_loglik(split_var, node, cnt, tot, sigma2, tau2):
    ll = 0.0
    empty = False
    for k in range(node, split_var.shape[0]):
        if split_var[k] == LEAF and _descends(k, node):
            if cnt[k] == 0:
                empty = True
            ll += _leaf_loglik(cnt[k], tot[k], sigma2, tau2)
    return ll, empty


@numba.njit(cache=True)
def _update_tree(split_var, split_value, leaf_value, leaf_of, X, r, sigma2, tau2,
                 cuts, cut_start, cut_count, alpha, beta, max_depth, p_grow, p_prune,
                 rng, sv_new, sval_new, lv_new, new_leaf, cnt_a, tot_a, cnt_b, tot_b):
    """One MH structural move plus leaf redraw for a single tree.

    ``r`` is the partial residual the tree is fitted to.  ``leaf_of`` and the
    tree arrays are updated in place.  Returns 1 if the move was accepted.
    """
    n = X.shape[0]
    kind, node, var, value, lqf, lqr, lpr = _propose(
        split_var, split_value, leaf_of, X, cuts, cut_start, cut_count,
        alpha, beta, max_depth, p_grow, p_prune, rng)
    accepted = 0
    if lpr > -np.inf:
        sv_new[:] = split_var
        sval_new[:] = split_value
        lv_new[:] = leaf_value
        _apply_move(sv_new, sval_new, lv_new, kind, node, var, value)
        for i in range(n):
            old = leaf_of[i]
            if _descends(old, node):
                cnt_a[old] += 1
                tot_a[old] += r[i]
                nl = _route(sv_new, sval_new, X[i], node)
                new_leaf[i] = nl
                cnt_b[nl] += 1
                tot_b[nl] += r[i]
            else:
                new_leaf[i] = old
        ll_old, _ = _subtree_loglik(split_var, node, cnt_a, tot_a, sigma2, tau2)
        ll_new, empty = _subtree_loglik(sv_new, node, cnt_b, tot_b, sigma2, tau2)
        if not empty:
            log_ratio = ll_new - ll_old + lpr + lqr - lqf
            if math.log(rng.random()) < log_ratio:
                accepted = 1
                split_var[:] = sv_new
                split_value[:] = sval_new
                leaf_value[:] = lv_new
                for i in range(n):
                    leaf_of[i] = new_leaf[i]
        cnt_a[:] = 0
        tot_a[:] = 0.0
        cnt_b[:] = 0
        tot_b[:] = 0.0

    for i in range(n):
        cnt_a[leaf_of[i]] += 1
        tot_a[leaf_of[i]] += r[i]
    for k in range(split_var.shape[0]):
        if split_var[k] == LEAF:
            prec = cnt_a[k] / sigma2 + 1.0 / tau2
            mean = tot_a[k] / sigma2 / prec
            leaf_value[k] = mean + rng.standard_normal() / math.sqrt(prec)
        elif split_var[k] == ABSENT:
            leaf_value[k] = 0.0
    cnt_a[:] = 0
    tot_a[:] = 0.0
    return accepted


@numba.njit(cache=True)
def _sweep(split_var, split_value, leaf_value, leaf_of, X, y, fit, sigma2, tau2,
           cuts, cut_start, cut_count, alpha, beta, max_depth, p_grow, p_prune, rng):
    m, size = split_var.shape
    n = X.shape[0]
    r = np.empty(n)
    sv_new = np.empty(size, dtype=split_var.dtype)
    sval_new = np.empty(size)
    lv_new = np.empty(size)
    new_leaf = np.empty(n, dtype=leaf_of.dtype)
    cnt_a = np.zeros(size, dtype=np.int64)
    tot_a = np.zeros(size)
    cnt_b = np.zeros(size, dtype=np.int64)
    tot_b = np.zeros(size)
    accepted = 0
    for t in range(m):
        lo = leaf_of[t]
        lv = leaf_value[t]
        for i in range(n):
            r[i] = y[i] - fit[i] + lv[lo[i]]
        accepted += _update_tree(split_var[t], split_value[t], lv, lo, X, r, sigma2, tau2,
                                 cuts, cut_start, cut_count, alpha, beta, max_depth,
                                 p_grow, p_prune, rng, sv_new, sval_new, lv_new, new_leaf,
                                 cnt_a, tot_a, cnt_b, tot_b)
        for i in range(n):
            fit[i] = y[i] - r[i] + lv[lo[i]]
    return accepted


class Forest:
    """Mutable sum-of-trees state owned by one sampler."""

    def __init__(self, X: np.ndarray, n_tree: int, init_value: float, config: BartConfig):
        self.X = np.ascontiguousarray(X, dtype=float)
        n = self.X.shape[0]
        size = capacity(config.max_depth)
        self.split_var = np.full((n_tree, size), ABSENT, dtype=np.int64)
        self.split_var[:, 0] = LEAF
        self.split_value = np.zeros((n_tree, size))
        self.leaf_value = np.zeros((n_tree, size))
        self.leaf_value[:, 0] = init_value
        self.leaf_of = np.zeros((n_tree, n), dtype=np.int64)
        self.fit = np.full(n, n_tree * init_value)
        self.candidates = SplitCandidates.from_matrix(self.X)
        self.config = config

    def sweep(self, y: np.ndarray, sigma2: float, tau2: float, rng: np.random.Generator) -> int:
        """Update every tree once against target ``y``; returns accepted moves."""
        c = self.config
        cand = self.candidates
        return _sweep(self.split_var, self.split_value, self.leaf_value, self.leaf_of,
                      self.X, np.ascontiguousarray(y, dtype=float), self.fit, float(sigma2),
                      float(tau2), cand.cuts, cand.start, cand.count, c.alpha, c.beta,
                      c.max_depth, c.move_probs[0], c.move_probs[1], rng)

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        if X.shape[0]:
            _predict_forest(self.split_var, self.split_value, self.leaf_value, X, out)
        return out

    def ensemble(self) -> TreeEnsemble:
        return TreeEnsemble([
            RegressionTree(self.split_var[t].copy(), self.split_value[t].copy(),
                           self.leaf_value[t].copy())
            for t in range(self.split_var.shape[0])
        ])


# ---------------------------------------------------------------------------
# helpers shared with the bivariate sampler


def _check_design(X, name: str) -> np.ndarray:
    X = np.ascontiguousarray(getattr(X, "values", X), dtype=float)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def _check_test(X_test, X: np.ndarray) -> np.ndarray:
    if X_test is None:
        return np.empty((0, X.shape[1]))
    X_test = _check_design(X_test, "X_test")
    if X_test.shape[1] != X.shape[1]:
        raise ValueError(f"X_test has {X_test.shape[1]} columns, X has {X.shape[1]}")
    return X_test


def sigma_prior_scale(y_scaled: np.ndarray, nu: float, q: float) -> float:
    """Scale ``lam`` of the nu*lam/chi2_nu prior that puts sd(y)^2 at quantile q."""
    sd2 = float(np.var(y_scaled, ddof=1))
    return sd2 * stats.chi2.ppf(1.0 - q, nu) / nu


def draw_sigma2(residuals: np.ndarray, nu: float, lam: float, rng: np.random.Generator) -> float:
    """Inverse chi-square full conditional of the error variance."""
    n = residuals.shape[0]
    ssr = float(residuals @ residuals)
    return (nu * lam + ssr) / rng.chisquare(nu + n)


@dataclass(frozen=True)
class _Scaling:
    low: float
    span: float

    @classmethod
    def of(cls, y: np.ndarray) -> "_Scaling":
        low, high = float(np.min(y)), float(np.max(y))
        span = high - low
        if not span > 0:
            raise ValueError("outcome is constant; cannot rescale")
        return cls(low, span)

    def forward(self, y):
        return (y - self.low) / self.span - 0.5

    def backward(self, z):
        return (z + 0.5) * self.span + self.low


# ---------------------------------------------------------------------------
# continuous outcome


def fit_bart(X, y, X_test=None, config: BartConfig = BartConfig()) -> BartPosterior:
    """Fit BART to a continuous outcome.

    Returns train and test predictions (on the original outcome scale) and
    error-variance draws for the ``n_mcmc - n_burn`` sweeps kept after
    burn-in.  Identical inputs and seed give bit-identical output.
    """
    X = _check_design(X, "X")
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise ValueError("y must be a vector with one entry per row of X")
    if X.shape[0] < 2:
        raise ValueError("need at least two observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains missing or non-finite values")
    X_test = _check_test(X_test, X)

    scale = _Scaling.of(y)
    ys = scale.forward(y)
    m = config.n_tree
    tau2 = (0.5 / (config.k * math.sqrt(m))) ** 2
    lam = sigma_prior_scale(ys, config.nu, config.q)
    rng = np.random.default_rng(config.seed)

    forest = Forest(X, m, float(ys.mean()) / m, config)
    sigma2 = float(np.var(ys, ddof=1))
    n_kept = config.n_kept
    train = np.empty((X.shape[0], n_kept))
    test = np.empty((X_test.shape[0], n_kept))
    sig = np.empty(n_kept)
    acc = np.empty(config.n_mcmc, dtype=np.int64)
    for it in range(config.n_mcmc):
        acc[it] = forest.sweep(ys, sigma2, tau2, rng)
        sigma2 = draw_sigma2(ys - forest.fit, config.nu, lam, rng)
        s = it - config.n_burn
        if s >= 0:
            train[:, s] = scale.backward(forest.predict(X))
            test[:, s] = scale.backward(forest.predict(X_test))
            sig[s] = sigma2 * scale.span ** 2
    return BartPosterior(train, test, sig, acc / m)


# ---------------------------------------------------------------------------
# binary outcome


def draw_latent(fit: np.ndarray, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Truncated-normal latent draws for probit augmentation.

    ``z ~ N(fit, 1)`` restricted to ``z > 0`` where ``t == 1`` and ``z <= 0``
    where ``t == 0``.  Inverse-CDF sampling in log space stays accurate when
    the truncation point is far in the tail.
    """
    u = rng.random(fit.shape[0])
    u = np.where(u > 0.0, u, np.finfo(float).tiny)
    log_u = np.log(u)
    pos = t == 1
    # e > -fit:  e = -ndtri(u * Phi(fit));  e <= -fit:  e = ndtri(u * Phi(-fit))
    e = np.where(pos, -ndtri_exp(log_u + log_ndtr(fit)), ndtri_exp(log_u + log_ndtr(-fit)))
    z = fit + e
    # rounding can land exactly on the boundary for extreme fits
    z = np.where(pos, np.maximum(z, np.finfo(float).tiny), np.minimum(z, 0.0))
    return z


def fit_probit_bart(X, t, config: BartConfig = BartConfig(), X_test=None) -> BartPosterior:
    """Fit probit BART to a 0/1 outcome by latent-variable augmentation.

    The returned ``y_hat_*`` draws are on the latent scale (offset by
    ``ndtri(mean(t))``); apply the normal CDF for probabilities.
    """
    X = _check_design(X, "X")
    t = np.asarray(t)
    if t.shape != (X.shape[0],):
        raise ValueError("t must be a vector with one entry per row of X")
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("t must be coded 0/1")
    if t.min() == t.max():
        raise ValueError("t contains a single class")
    t = t.astype(np.int8)
    X_test = _check_test(X_test, X)

    m = config.n_tree
    tau2 = (3.0 / (config.k * math.sqrt(m))) ** 2
    offset = float(stats.norm.ppf(t.mean()))
    rng = np.random.default_rng(config.seed)
    forest = Forest(X, m, 0.0, config)

    n_kept = config.n_kept
    train = np.empty((X.shape[0], n_kept))
    test = np.empty((X_test.shape[0], n_kept))
    acc = np.empty(config.n_mcmc, dtype=np.int64)
    for it in range(config.n_mcmc):
        z = draw_latent(offset + forest.fit, t, rng)
        acc[it] = forest.sweep(z - offset, 1.0, tau2, rng)
        s = it - config.n_burn
        if s >= 0:
            train[:, s] = offset + forest.predict(X)
            test[:, s] = offset + forest.predict(X_test)
    return BartPosterior(train, test, None, acc / m, latent=True)


def estimate_ps(posterior: BartPosterior) -> np.ndarray:
    """Posterior-mean propensity score: average of Phi over the kept draws."""
    ps = ndtr(np.asarray(posterior.y_hat_train, dtype=float)).mean(axis=1)
    # keep strictly inside (0, 1) when every draw saturates Phi
    return np.clip(ps, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
