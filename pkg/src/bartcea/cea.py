"""Treatment effects and cost-effectiveness summaries from posterior draws.

Effects are obtained by g-computation: every patient is predicted under
both treatment values and the per-draw average difference is the draw of
the average treatment effect.  A pair ``(delta_c, delta_q)`` per draw then
drives the incremental net benefit ``lam * delta_q - delta_c`` and the
acceptability curve ``P(INB > 0)``.  Ties (INB exactly zero) count as not
cost-effective.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import DesignMatrix

DEFAULT_WTP = (20000.0, 50000.0)


def counterfactual_stack(values: np.ndarray, treatment_col: int) -> np.ndarray:
    """Stack ``values`` twice, treatment forced to 0 in the top half, 1 below."""
    values = np.asarray(values, dtype=float)
    out = np.vstack([values, values])
    n = values.shape[0]
    out[:n, treatment_col] = 0.0
    out[n:, treatment_col] = 1.0
    return out


def build_counterfactual_design(X: DesignMatrix, treatment: str = "t") -> DesignMatrix:
    """Return the 2n-row design used for g-computation.

    Rows ``0..n-1`` are the patients with treatment set to 0 and rows
    ``n..2n-1`` the same patients with treatment set to 1; all other
    columns are copied.
    """
    col = X.index(treatment)
    return DesignMatrix(counterfactual_stack(X.values, col), X.column_names, dict(X.factor_origin))


@dataclass(frozen=True)
class AteDraws:
    delta_c: np.ndarray
    delta_q: np.ndarray

    def __post_init__(self):
        dc = np.asarray(self.delta_c, dtype=float).ravel()
        dq = np.asarray(self.delta_q, dtype=float).ravel()
        if dc.shape != dq.shape:
            raise ValueError("delta_c and delta_q must have equal length")
        if not (np.all(np.isfinite(dc)) and np.all(np.isfinite(dq))):
            raise ValueError("effect draws must be finite")
        object.__setattr__(self, "delta_c", dc)
        object.__setattr__(self, "delta_q", dq)

    def __len__(self) -> int:
        return self.delta_c.shape[0]


def compute_ate_draws(posterior, n: int) -> AteDraws:
    """Per-draw g-computation on a counterfactual test stack.

    ``posterior`` is a :class:`~bartcea.subart.SubartPosterior` (or its
    ``y_hat_test`` array) of shape ``(2n, 2, n_draws)`` ordered as produced
    by :func:`build_counterfactual_design`.
    """
    pred = np.asarray(getattr(posterior, "y_hat_test", posterior), dtype=float)
    if pred.ndim != 3 or pred.shape[1] != 2:
        raise ValueError("expected predictions of shape (2n, 2, n_draws)")
    if pred.shape[0] != 2 * n:
        raise ValueError(f"test predictions cover {pred.shape[0]} rows, expected {2 * n}")
    effect = pred[n:].mean(axis=0) - pred[:n].mean(axis=0)
    return AteDraws(effect[0], effect[1])


def compute_inb(draws: AteDraws, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("willingness-to-pay must be non-negative")
    return lam * draws.delta_q - draws.delta_c


def lambda_grid(low: float = 0.0, high: float = 50000.0, points: int = 1000) -> np.ndarray:
    if low > high:
        raise ValueError("lambda min exceeds max")
    if points < 1:
        raise ValueError("need at least one grid point")
    return np.linspace(low, high, points)


@dataclass(frozen=True)
class CeacCurve:
    lam: np.ndarray
    p: np.ndarray

    def at(self, lam: float) -> float:
        idx = np.flatnonzero(self.lam == lam)
        if idx.size == 0:
            raise KeyError(lam)
        return float(self.p[idx[0]])


def compute_ceac(draws: AteDraws, grid) -> CeacCurve:
    grid = np.asarray(grid, dtype=float).ravel()
    if len(draws) == 0 or grid.size == 0:
        raise ValueError("need at least one draw and one grid point")
    if np.any(np.diff(grid) < 0):
        raise ValueError("lambda grid must be non-decreasing")
    p = np.array([np.mean(compute_inb(draws, lam) > 0) for lam in grid])
    return CeacCurve(grid, p)


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float


@dataclass(frozen=True)
class CeaSummary:
    n_draws: int
    mean_delta_c: float
    mean_delta_q: float
    sd_delta_c: float
    sd_delta_q: float
    ci90_delta_c: Interval
    ci90_delta_q: Interval
    ci95_delta_c: Interval
    ci95_delta_q: Interval
    correlation: float | None
    prob_cost_effective: dict[str, float]

    def to_dict(self) -> dict:
        return asdict(self)


def _interval(x: np.ndarray, level: float) -> Interval:
    tail = 50.0 * (1.0 - level)
    lo, hi = np.percentile(x, [tail, 100.0 - tail])
    return Interval(float(lo), float(hi))


def summarize(draws: AteDraws, wtp=DEFAULT_WTP) -> CeaSummary:
    """Posterior means, sds, 90/95% percentile intervals, correlation, P(INB > 0).

    The correlation is ``None`` when either margin is constant.
    """
    if len(draws) < 2:
        raise ValueError("need at least two draws to summarize")
    dc, dq = draws.delta_c, draws.delta_q
    if np.ptp(dc) > 0 and np.ptp(dq) > 0:
        corr = float(np.corrcoef(dc, dq)[0, 1])
    else:
        corr = None
    return CeaSummary(
        n_draws=len(draws),
        mean_delta_c=float(dc.mean()),
        mean_delta_q=float(dq.mean()),
        sd_delta_c=float(dc.std(ddof=1)),
        sd_delta_q=float(dq.std(ddof=1)),
        ci90_delta_c=_interval(dc, 0.90),
        ci90_delta_q=_interval(dq, 0.90),
        ci95_delta_c=_interval(dc, 0.95),
        ci95_delta_q=_interval(dq, 0.95),
        correlation=corr,
        prob_cost_effective={
            f"{lam:g}": float(np.mean(compute_inb(draws, lam) > 0)) for lam in wtp
        },
    )
