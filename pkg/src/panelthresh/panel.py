"""Balanced-panel data model, CSV ingestion, and projection building blocks.

The estimators in this package all operate on a balanced N x T panel with K
observed regressors per unit, a scalar threshold variable q, and a boolean
selection mask saying which regressors switch coefficient between regimes.
Unobserved common factors are removed by projecting every unit's data on the
orthogonal complement of the cross-sectional averages of the regressors
(optionally augmented with an intercept column).
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import PanelDataError, PanelThreshError


class RegimeDirection(enum.Enum):
    """Which side of the threshold receives the extra coefficient.

    LOW_REGIME_LEQ: indicator fires when q <= gamma (the default).
    HIGH_REGIME_GEQ: indicator fires when q >= gamma (e.g. "high openness"
    regimes).  Ties q == gamma always belong to the firing regime.
    """

    LOW_REGIME_LEQ = "leq"
    HIGH_REGIME_GEQ = "geq"


def regime_indicator(q: np.ndarray, gamma: float, direction: RegimeDirection) -> np.ndarray:
    """Boolean vector of periods in which the threshold effect is active."""
    q = np.asarray(q, dtype=float)
    if direction is RegimeDirection.LOW_REGIME_LEQ:
        return q <= gamma
    return q >= gamma


@dataclass(frozen=True)
class PanelDataset:
    """Balanced panel: outcome, regressors, threshold variable, metadata.

    Attributes
    ----------
    y : (T, N) outcome, one column per unit.
    x : (N, T, K) regressors, one T x K matrix per unit.
    q : (T, N) scalar threshold variable per unit.
    selection : (K,) boolean mask of regressors carrying the threshold effect.
    direction : regime convention for the indicator.
    constant_col : index of a declared constant regressor column, if any.
        A constant column is an observed common factor and does not count
        toward the factor rank condition.
    """

    y: np.ndarray
    x: np.ndarray
    q: np.ndarray
    unit_labels: list[str]
    time_labels: list[str]
    selection: np.ndarray
    direction: RegimeDirection = RegimeDirection.LOW_REGIME_LEQ
    constant_col: int | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        q = np.asarray(self.q, dtype=float)
        sel = np.asarray(self.selection, dtype=bool)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "selection", sel)
        if x.ndim != 3:
            raise PanelDataError(f"x must be (N, T, K), got shape {x.shape}")
        n, t, k = x.shape
        if y.shape != (t, n):
            raise PanelDataError(f"y must be (T, N) = {(t, n)}, got {y.shape}")
        if q.shape != (t, n):
            raise PanelDataError(f"q must be (T, N) = {(t, n)}, got {q.shape}")
        if len(self.unit_labels) != n or len(self.time_labels) != t:
            raise PanelDataError("label lengths do not match data dimensions")
        if not (np.isfinite(y).all() and np.isfinite(x).all() and np.isfinite(q).all()):
            raise PanelDataError("panel contains non-finite values")
        if sel.shape != (k,):
            raise PanelDataError(f"selection must have length K={k}")
        if not sel.any():
            raise PanelDataError("selection must mark at least one regressor")
        if self.constant_col is not None and not 0 <= self.constant_col < k:
            raise PanelDataError("constant_col out of range")

    @property
    def n_units(self) -> int:
        return self.x.shape[0]

    @property
    def n_periods(self) -> int:
        return self.x.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.x.shape[2]

    @property
    def n_threshold(self) -> int:
        """Number of regressors with a regime-switching coefficient (r)."""
        return int(self.selection.sum())

    @property
    def n_rank_regressors(self) -> int:
        """Regressor count entering the factor rank condition m <= K."""
        return self.n_regressors - (0 if self.constant_col is None else 1)

    def unit(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(x_i, y_i, q_i) for unit i."""
        return self.x[i], self.y[:, i], self.q[:, i]


@dataclass(frozen=True)
class IngestReport:
    n_units: int
    n_periods: int
    n_regressors: int
    n_threshold: int


@dataclass(frozen=True)
class PanelSchema:
    """Column mapping for CSV ingestion.

    threshold_cols selects which x columns switch regime; q_col may coincide
    with one of the x columns or be a separate column.  With
    quantile_q=True the threshold variable is replaced by its within-unit
    percentile (values in (0, 100]), which gives a common support across
    units and makes a pooled threshold meaningful.
    """

    unit_col: str
    time_col: str
    y_col: str
    x_cols: list[str]
    q_col: str
    threshold_cols: list[str] = field(default_factory=list)
    direction: RegimeDirection = RegimeDirection.LOW_REGIME_LEQ
    delimiter: str = ","
    constant_col: str | None = None
    quantile_q: bool = False


def load_panel(source, schema: PanelSchema) -> tuple[PanelDataset, IngestReport]:
    """Read a long-format CSV into a balanced, (unit, time)-sorted panel.

    Parameters
    ----------
    source : path, file-like, or bytes containing CSV text with a header row.
    schema : column mapping, selection and regime direction.

    Raises
    ------
    PanelDataError
        On duplicate (unit, time) pairs, unbalanced units, missing values,
        or schema columns absent from the file.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    df = pd.read_csv(source, delimiter=schema.delimiter)

    value_cols = list(dict.fromkeys([schema.y_col] + schema.x_cols + [schema.q_col]))
    needed = [schema.unit_col, schema.time_col] + value_cols
    missing_cols = [c for c in needed if c not in df.columns]
    if missing_cols:
        raise PanelDataError(f"columns missing from CSV: {missing_cols}")
    if not schema.x_cols:
        raise PanelDataError("schema must name at least one regressor column")
    thr = schema.threshold_cols or list(schema.x_cols)
    bad = [c for c in thr if c not in schema.x_cols]
    if bad:
        raise PanelDataError(f"threshold columns not among regressors: {bad}")

    df = df[needed].copy()
    dup = df.duplicated(subset=[schema.unit_col, schema.time_col])
    if dup.any():
        pairs = df.loc[dup, [schema.unit_col, schema.time_col]].values[:5].tolist()
        raise PanelDataError(f"duplicate (unit, time) rows, e.g. {pairs}")

    for c in value_cols:
        df[c] = pd.to_numeric(df[c], errors="coerce")
    na_mask = df[value_cols].isna()
    if na_mask.values.any():
        rows, cols = np.nonzero(na_mask.values)
        locs = [
            (df[schema.unit_col].iloc[r], df[schema.time_col].iloc[r], value_cols[c])
            for r, c in zip(rows[:10], cols[:10])
        ]
        raise PanelDataError(f"missing/non-numeric values at (unit, time, column): {locs}")

    df = df.sort_values([schema.unit_col, schema.time_col], kind="mergesort")
    units = df[schema.unit_col].unique().tolist()
    time_sets = df.groupby(schema.unit_col, sort=False)[schema.time_col].apply(tuple)
    ref_times = time_sets.iloc[0]
    offending = [str(u) for u, ts in time_sets.items() if ts != ref_times]
    if offending:
        raise PanelDataError(f"unbalanced panel: units with deviating time coverage: {offending}")

    n, t, k = len(units), len(ref_times), len(schema.x_cols)
    x = df[schema.x_cols].values.reshape(n, t, k)
    y = df[schema.y_col].values.reshape(n, t).T
    q = df[schema.q_col].values.reshape(n, t).T
    if schema.quantile_q:
        # within-unit empirical percentile, inclusive: p_i(v) = 100 * F_i(v)
        q = 100.0 * (q[:, None, :] <= q[None, :, :]).mean(axis=0)

    selection = np.array([c in thr for c in schema.x_cols], dtype=bool)
    const_idx = None
    if schema.constant_col is not None:
        if schema.constant_col not in schema.x_cols:
            raise PanelDataError("constant_col must be one of the regressor columns")
        const_idx = schema.x_cols.index(schema.constant_col)

    dataset = PanelDataset(
        y=y,
        x=x,
        q=q,
        unit_labels=[str(u) for u in units],
        time_labels=[str(tt) for tt in ref_times],
        selection=selection,
        direction=schema.direction,
        constant_col=const_idx,
    )
    report = IngestReport(n, t, k, dataset.n_threshold)
    return dataset, report


def cross_sectional_average(panel: PanelDataset, include_intercept: bool = False) -> np.ndarray:
    """Average the regressor matrices over units: (T, K) or (T, K+1).

    Column k at time t is the plain mean of x_{i,t,k} over i.  With
    include_intercept a leading column of ones is prepended, treating the
    intercept as an observed common factor.
    """
    avg = panel.x.mean(axis=0)
    if include_intercept:
        ones = np.ones((panel.n_periods, 1))
        avg = np.hstack([ones, avg])
    return avg


@dataclass(frozen=True)
class Projector:
    """Annihilator M = I - B (B'B)^+ B' stored through its basis B.

    The pseudo-inverse makes the projector well defined when the basis
    columns are collinear.  apply() never materialises the T x T matrix.
    """

    basis: np.ndarray
    gram_pinv: np.ndarray

    @property
    def n_periods(self) -> int:
        return self.basis.shape[0]

    @property
    def n_basis(self) -> int:
        return self.basis.shape[1]

    def apply(self, a: np.ndarray) -> np.ndarray:
        """Project columns of a onto the orthogonal complement of the basis."""
        a = np.asarray(a, dtype=float)
        if a.shape[0] != self.n_periods:
            raise PanelThreshError(
                f"projector built for T={self.n_periods}, got array with {a.shape[0]} rows"
            )
        if self.n_basis == 0:
            return a.copy()
        return a - self.basis @ (self.gram_pinv @ (self.basis.T @ a))

    def matrix(self) -> np.ndarray:
        """Dense T x T projection matrix (for small-scale checks)."""
        return np.eye(self.n_periods) - self.basis @ self.gram_pinv @ self.basis.T


def make_projector(basis: np.ndarray) -> Projector:
    """Build the annihilator of the column space of `basis` (T x p, p < T)."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.ndim != 2:
        raise PanelThreshError("basis must be a T x p matrix")
    t, p = basis.shape
    if p >= t:
        raise PanelThreshError(
            f"projection would annihilate everything: p={p} columns >= T={t} rows"
        )
    if not np.isfinite(basis).all():
        raise PanelThreshError("basis contains non-finite values")
    gram_pinv = np.linalg.pinv(basis.T @ basis)
    return Projector(basis=basis, gram_pinv=gram_pinv)


def identity_projector(n_periods: int) -> Projector:
    """Projector that leaves data untouched (no factor correction)."""
    basis = np.empty((n_periods, 0))
    return Projector(basis=basis, gram_pinv=np.empty((0, 0)))


@dataclass(frozen=True)
class RegimeMatrices:
    """Regime-masked threshold regressors and the stacked design [x | w_low]."""

    w_low: np.ndarray
    z: np.ndarray


def regime_split(
    x_i: np.ndarray,
    q_i: np.ndarray,
    gamma: float,
    selection: np.ndarray,
    direction: RegimeDirection = RegimeDirection.LOW_REGIME_LEQ,
) -> RegimeMatrices:
    """Mask the selected regressors by the regime indicator at `gamma`.

    Rows of w_low equal the selected sub-row of x_i where the indicator
    fires and zero elsewhere; z = [x_i | w_low].  Degenerate regimes
    (indicator all 0 or all 1) are permitted here; estimators reject them.
    """
    x_i = np.asarray(x_i, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    if not np.isfinite(gamma):
        raise PanelThreshError("gamma must be finite")
    ind = regime_indicator(q_i, gamma, direction)
    w_low = x_i[:, np.asarray(selection, dtype=bool)] * ind[:, None]
    return RegimeMatrices(w_low=w_low, z=np.hstack([x_i, w_low]))
