"""Loading and encoding of cost-effectiveness datasets.

A dataset holds baseline covariates, a binary treatment indicator and a
bivariate outcome (cost, health) whose cells may be missing.  Only the
outcomes may be missing; the samplers condition on covariates and cannot
impute them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

MISSING_TOKENS = ("NA", "")


class DataError(ValueError):
    """Raised when an input table violates the dataset contract."""


class ColumnKind(enum.Enum):
    NUMERIC = "numeric"
    BINARY = "binary"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Schema:
    """Assignment of CSV columns to their roles."""

    treatment: str
    cost: str
    health: str
    covariates: tuple[str, ...]
    factors: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "factors", tuple(self.factors))
        unknown = set(self.factors) - set(self.covariates)
        if unknown:
            raise DataError(f"factor columns not listed as covariates: {sorted(unknown)}")

    @property
    def columns(self) -> tuple[str, ...]:
        return (self.cost, self.health, self.treatment) + self.covariates


@dataclass(frozen=True)
class Covariate:
    name: str
    kind: ColumnKind
    values: np.ndarray
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Dataset:
    """Covariates, treatment and a two-column outcome matrix with mask.

    ``outcomes[:, 0]`` is cost, ``outcomes[:, 1]`` is health.  Masked cells
    hold NaN.
    """

    covariates: tuple[Covariate, ...]
    treatment: np.ndarray
    outcomes: np.ndarray
    missing_mask: np.ndarray
    treatment_name: str = "t"
    outcome_names: tuple[str, str] = ("c", "q")

    def __post_init__(self):
        object.__setattr__(self, "treatment", np.array(self.treatment))
        object.__setattr__(self, "outcomes", np.array(self.outcomes, dtype=float))
        object.__setattr__(self, "missing_mask", np.array(self.missing_mask, dtype=bool))
        t = self.treatment
        n = t.shape[0]
        if n < 2:
            raise DataError("a dataset needs at least two patients")
        if not np.all((t == 0) | (t == 1)):
            raise DataError("treatment must be coded 0/1 with no missing values")
        if t.min() == t.max():
            raise DataError("both treatment arms must contain at least one patient")
        if self.outcomes.shape != (n, 2) or self.missing_mask.shape != (n, 2):
            raise DataError("outcomes and missing_mask must be n x 2")
        for cov in self.covariates:
            if len(cov.values) != n:
                raise DataError(f"covariate {cov.name!r} has wrong length")
            if cov.kind is ColumnKind.CATEGORICAL and len(cov.levels) < 2:
                raise DataError(f"factor {cov.name!r} needs at least two observed levels")
        for arr in (self.treatment, self.outcomes, self.missing_mask):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.treatment.shape[0]

    @property
    def covariate_names(self) -> list[str]:
        return [c.name for c in self.covariates]

    def covariate(self, name: str) -> Covariate:
        for cov in self.covariates:
            if cov.name == name:
                return cov
        raise KeyError(name)

    def to_frame(self) -> pd.DataFrame:
        """Return the table in its input layout, masked cells as NaN."""
        cols = {
            self.outcome_names[0]: self.outcomes[:, 0],
            self.outcome_names[1]: self.outcomes[:, 1],
            self.treatment_name: self.treatment,
        }
        for cov in self.covariates:
            cols[cov.name] = cov.values
        return pd.DataFrame(cols)


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    column_names: tuple[str, ...]
    factor_origin: Mapping[str, tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", np.array(self.values, dtype=float))
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise DataError("design values do not match column names")
        if self.values.shape[1] < 1:
            raise DataError("design matrix needs at least one column")
        self.values.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise KeyError(name) from None


def _is_na(cell: str, na_codes: Sequence) -> bool:
    if cell in MISSING_TOKENS:
        return True
    for code in na_codes:
        if isinstance(code, str):
            if cell == code:
                return True
            try:
                code = float(code)
            except ValueError:
                continue
        try:
            if float(cell) == float(code):
                return True
        except ValueError:
            pass
    return False


def _parse_numeric(cells: Sequence[str], column: str, na_codes, allow_missing: bool) -> np.ndarray:
    out = np.empty(len(cells))
    for i, cell in enumerate(cells):
        cell = cell.strip()
        if _is_na(cell, na_codes):
            if not allow_missing:
                raise DataError(f"missing value in column {column!r} at row {i + 1}")
            out[i] = np.nan
            continue
        try:
            value = float(cell)
        except ValueError:
            raise DataError(
                f"non-numeric value {cell!r} in column {column!r} at row {i + 1}"
            ) from None
        if not math.isfinite(value):
            raise DataError(f"non-finite value in column {column!r} at row {i + 1}")
        out[i] = value
    return out


def _canonical_level(cell: str) -> str:
    # "3" and "3.0" name the same level
    try:
        value = float(cell)
    except ValueError:
        return cell
    return str(int(value)) if value.is_integer() else repr(value)


def load_csv(path: str | Path, schema: Schema, na_codes: Sequence = ()) -> Dataset:
    """Read a comma-separated table into a :class:`Dataset`.

    ``NA`` and empty cells are always missing; any cell equal to one of
    ``na_codes`` (compared as text and numerically) is missing too.
    Missing values are only accepted in the two outcome columns.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False)
    frame.columns = [c.strip() for c in frame.columns]
    unknown = [c for c in schema.columns if c not in frame.columns]
    if unknown:
        raise DataError(f"columns not found in {path}: {unknown}")

    outcomes = np.column_stack(
        [
            _parse_numeric(frame[schema.cost].tolist(), schema.cost, na_codes, True),
            _parse_numeric(frame[schema.health].tolist(), schema.health, na_codes, True),
        ]
    )
    treatment = _parse_numeric(frame[schema.treatment].tolist(), schema.treatment, na_codes, False)
    bad = np.flatnonzero((treatment != 0) & (treatment != 1))
    if bad.size:
        raise DataError(
            f"treatment column {schema.treatment!r} must be 0/1; row {bad[0] + 1} "
            f"holds {treatment[bad[0]]!r}"
        )

    covariates = []
    for name in schema.covariates:
        cells = [c.strip() for c in frame[name].tolist()]
        if name in schema.factors:
            for i, cell in enumerate(cells):
                if _is_na(cell, na_codes):
                    raise DataError(f"missing value in column {name!r} at row {i + 1}")
            values = np.array([_canonical_level(c) for c in cells], dtype=object)
            levels = tuple(sorted(set(values)))
            covariates.append(Covariate(name, ColumnKind.CATEGORICAL, values, levels))
        else:
            values = _parse_numeric(cells, name, na_codes, False)
            binary = bool(np.all((values == 0) | (values == 1)))
            kind = ColumnKind.BINARY if binary else ColumnKind.NUMERIC
            covariates.append(Covariate(name, kind, values))

    return Dataset(
        covariates=tuple(covariates),
        treatment=treatment.astype(np.int8),
        outcomes=outcomes,
        missing_mask=np.isnan(outcomes),
        treatment_name=schema.treatment,
        outcome_names=(schema.cost, schema.health),
    )


def encode(
    dataset: Dataset,
    extra_columns: Mapping[str, Sequence[float]] | None = None,
    *,
    include_treatment: bool = True,
) -> DesignMatrix:
    """Build a numeric design matrix.

    Column order: treatment (if requested), covariates in dataset order with
    each k-level factor expanded to k-1 dummies (first level in lexicographic
    order is the reference), then ``extra_columns`` in mapping order.
    """
    n = dataset.n
    columns: list[np.ndarray] = []
    names: list[str] = []
    origin: dict[str, tuple[str, str]] = {}
    if include_treatment:
        columns.append(dataset.treatment.astype(float))
        names.append(dataset.treatment_name)
    for cov in dataset.covariates:
        if cov.kind is ColumnKind.CATEGORICAL:
            for level in cov.levels[1:]:
                dummy = f"{cov.name}_{level}"
                columns.append((cov.values == level).astype(float))
                names.append(dummy)
                origin[dummy] = (cov.name, level)
        else:
            columns.append(np.asarray(cov.values, dtype=float))
            names.append(cov.name)
    for name, col in (extra_columns or {}).items():
        col = np.asarray(col, dtype=float)
        if col.shape != (n,):
            raise DataError(f"extra column {name!r} has length {col.shape[0]}, expected {n}")
        columns.append(col)
        names.append(name)
    if not columns:
        raise DataError("nothing to encode")
    return DesignMatrix(np.column_stack(columns), tuple(names), origin)
