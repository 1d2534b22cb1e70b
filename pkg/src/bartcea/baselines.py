"""Least-squares comparators: per-outcome OLS and two-equation SUR.

When both equations use the same regressors, the SUR (feasible GLS)
estimator coincides with equation-by-equation OLS, so :func:`fit_sur`
returns the OLS coefficients together with the cross-equation residual
covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class LinearFit:
    """Intercept-first coefficients and residual (co)variance.

    ``coefficients`` is ``(p + 1,)`` for one outcome and ``(2, p + 1)`` for
    two; ``residual_cov`` is a float or a 2 x 2 matrix accordingly.
    """

    coefficients: np.ndarray
    residual_cov: float | np.ndarray
    column_names: tuple[str, ...]

    def coef(self, name: str, equation: int | None = None) -> float:
        j = self.column_names.index(name)
        beta = self.coefficients if equation is None else self.coefficients[equation]
        return float(beta[j])

    @property
    def residual_corr(self) -> float:
        s = np.asarray(self.residual_cov)
        return float(s[0, 1] / np.sqrt(s[0, 0] * s[1, 1]))


def _design(X, names: Sequence[str] | None) -> tuple[np.ndarray, tuple[str, ...]]:
    values = np.asarray(getattr(X, "values", X), dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if names is None:
        names = getattr(X, "column_names", None) or [f"x{j}" for j in range(values.shape[1])]
    A = np.column_stack([np.ones(values.shape[0]), values])
    return A, ("(intercept)",) + tuple(names)


def _solve(A: np.ndarray, Y: np.ndarray, names: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
    n, k = A.shape
    if n <= k:
        raise ValueError(f"need more than {k} observations, got {n}")
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    tol = diag.max() * max(n, k) * np.finfo(float).eps
    weak = np.flatnonzero(diag <= tol)
    if weak.size:
        # name the columns that are linear combinations of earlier ones
        raise np.linalg.LinAlgError(
            f"design is rank deficient; collinear columns: {[names[j] for j in weak]}"
        )
    beta = np.linalg.solve(R, Q.T @ Y)
    return beta, Y - A @ beta


def fit_ols(X, y, names: Sequence[str] | None = None) -> LinearFit:
    """Ordinary least squares with an intercept, via QR."""
    A, cols = _design(X, names)
    y = np.asarray(y, dtype=float)
    beta, resid = _solve(A, y, cols)
    dof = A.shape[0] - A.shape[1]
    return LinearFit(beta, float(resid @ resid / dof), cols)


def fit_sur(X, Y, names: Sequence[str] | None = None) -> LinearFit:
    """Two-equation SUR with shared regressors.

    Outcomes must be complete; there is no listwise deletion.
    """
    A, cols = _design(X, names)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != 2 or Y.shape[0] != A.shape[0]:
        raise ValueError("Y must be n x 2")
    if not np.all(np.isfinite(Y)):
        raise ValueError("SUR baseline needs complete outcomes")
    beta, resid = _solve(A, Y, cols)
    dof = A.shape[0] - A.shape[1]
    return LinearFit(beta.T, resid.T @ resid / dof, cols)
