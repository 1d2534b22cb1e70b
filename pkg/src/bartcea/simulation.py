"""Misspecification experiment: OLS versus BART for a nonlinear cost model.

Costs follow ``c = t + 3 sin(x) x**2 + eps`` with ``x, eps ~ N(0, 1)``, so
the true average treatment effect is 1.  Treatment is assigned either at
random with probability 0.5 or with probability ``1 / (1 + exp(-3x))``.
OLS fits ``c ~ 1 + t + x`` and reports the coefficient of ``t``; BART fits
``c`` on ``(x, t)`` and reports the g-computation effect of the posterior
mean predictions.

By default ``x`` is drawn once and shared by every replication of every
scenario, as in the original experiment code; ``shared_x=False`` draws a
fresh ``x`` per replication instead.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import fit_ols
from .bart import BartConfig, fit_bart
from .cea import counterfactual_stack

TRUE_ATE = 1.0
EXPERIMENT_BART = BartConfig(n_tree=100, n_mcmc=1100, n_burn=100)
HIST_RANGE = (-1.0, 3.0)
HIST_BINS = 30


class Assignment(str, enum.Enum):
    RANDOMIZED = "randomized"
    CONFOUNDED = "confounded"


@dataclass(frozen=True)
class SimScenario:
    assignment: Assignment = Assignment.RANDOMIZED
    n: int = 200
    n_sim: int = 100
    noise_sd: float = 1.0
    seed: int = 0
    shared_x: bool = True

    def __post_init__(self):
        object.__setattr__(self, "assignment", Assignment(self.assignment))
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if self.n_sim < 1:
            raise ValueError("n_sim must be at least 1")


@dataclass(frozen=True)
class SimData:
    x: np.ndarray
    t: np.ndarray
    c: np.ndarray
    ps: np.ndarray

    @property
    def ey0(self) -> np.ndarray:
        return outcome_surface(self.x)

    @property
    def ey1(self) -> np.ndarray:
        return outcome_surface(self.x) + TRUE_ATE


def outcome_surface(x: np.ndarray) -> np.ndarray:
    """Expected cost under control."""
    return 3.0 * np.sin(x) * x ** 2


def propensity(x: np.ndarray, assignment: Assignment) -> np.ndarray:
    if Assignment(assignment) is Assignment.RANDOMIZED:
        return np.full(np.shape(x), 0.5)
    return 1.0 / (1.0 + np.exp(-3.0 * np.asarray(x)))


def gen_dataset(scenario: SimScenario, rng: np.random.Generator, x: np.ndarray | None = None,
                noise: bool = True) -> SimData:
    if x is None:
        x = rng.standard_normal(scenario.n)
    ps = propensity(x, scenario.assignment)
    t = rng.binomial(1, ps).astype(np.int8)
    c = outcome_surface(x) + TRUE_ATE * t
    if noise:
        c = c + scenario.noise_sd * rng.standard_normal(x.shape[0])
    return SimData(x, t, c, ps)


def ate_from_predictions(pred: np.ndarray, n: int) -> float:
    """Mean difference between the treated and control halves of a stacked prediction."""
    pred = np.asarray(pred, dtype=float)
    return float(np.mean(pred[n:2 * n] - pred[:n]))


def ols_estimate(data: SimData) -> float:
    return fit_ols(np.column_stack([data.t, data.x]), data.c, names=("t", "x")).coef("t")


def bart_estimate(data: SimData, config: BartConfig) -> float:
    X = np.column_stack([data.x, data.t.astype(float)])
    post = fit_bart(X, data.c, counterfactual_stack(X, 1), config)
    return ate_from_predictions(post.y_hat_test_mean, data.x.shape[0])


@dataclass
class SimResult:
    scenario: SimScenario
    estimates: dict[str, np.ndarray]
    true_ate: float = TRUE_ATE
    treated_fraction: np.ndarray = field(default_factory=lambda: np.empty(0))

    def summary(self) -> dict[str, dict[str, float | None]]:
        out = {}
        for name, est in self.estimates.items():
            out[name] = {
                "mean": float(est.mean()),
                "sd": float(est.std(ddof=1)) if est.size > 1 else None,
                "bias": float(est.mean() - self.true_ate),
                "n": int(est.size),
            }
        return out

    def histogram(self, estimator: str, bins: int = HIST_BINS, limits=HIST_RANGE):
        est = self.estimates[estimator]
        counts, edges = np.histogram(est, bins=bins, range=limits)
        outside = int(np.sum((est < limits[0]) | (est > limits[1])))
        return counts, edges, outside


def _streams(scenario: SimScenario) -> list[np.random.SeedSequence]:
    # child 0 draws the shared covariate; child i + 1 drives replication i
    return np.random.SeedSequence(scenario.seed).spawn(scenario.n_sim + 1)


def _replicate(args):
    scenario, stream, x, estimators, config = args
    rng = np.random.default_rng(stream)
    data = gen_dataset(scenario, rng, x)
    bart_seed = int(rng.integers(2 ** 63))
    row = {}
    for name in estimators:
        if name == "ols":
            row[name] = ols_estimate(data)
        elif name == "bart":
            row[name] = bart_estimate(data, replace(config, seed=bart_seed))
        else:
            raise ValueError(f"unknown estimator {name!r}")
    return row, float(data.t.mean())


def run_experiment(scenario: SimScenario, estimators=("ols", "bart"),
                   bart_config: BartConfig = EXPERIMENT_BART, n_jobs: int = 1) -> SimResult:
    """Run ``scenario.n_sim`` independent replications.

    Every replication has its own random stream spawned from
    ``scenario.seed``, so results do not depend on ``n_jobs``.
    """
    estimators = tuple(estimators)
    streams = _streams(scenario)
    x = np.random.default_rng(streams[0]).standard_normal(scenario.n) if scenario.shared_x else None
    jobs = [(scenario, s, x, estimators, bart_config) for s in streams[1:]]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_replicate, jobs))
    else:
        rows = [_replicate(job) for job in jobs]
    estimates = {name: np.array([r[name] for r, _ in rows]) for name in estimators}
    return SimResult(scenario, estimates, TRUE_ATE, np.array([f for _, f in rows]))


def ols_oracle_bias(assignment: Assignment, n: int = 200_000, seed: int = 20240101) -> float:
    """Large-sample limit of the OLS treatment coefficient minus the true effect."""
    scenario = SimScenario(assignment=assignment, n=n, n_sim=1, seed=seed)
    data = gen_dataset(scenario, np.random.default_rng(seed))
    return ols_estimate(data) - TRUE_ATE
