"""Tests of the no-threshold null hypothesis.

Per unit, the statistic is the supremum over candidate thresholds of the
Wald form T * d(g)' V(g)^-1 d(g), where d(g) is the regime-difference
estimate at threshold g and V(g) a kernel-weighted sandwich built from the
regime regressors residualised on everything else in the unit regression.

For the panel-wide null (all regime differences zero) a pooled estimator
d_p(g) replaces the per-unit ones: each unit's regime regressors and outcome
are projected off (cross-sectional averages, the cross-sectional average of
the masked regressors at g, the unit's own regressors), and the projected
blocks are accumulated across units before solving.  The pooled Wald uses
the N*T scaling.

Null distributions are non-standard, so p-values come from a wild
(Rademacher multiplier) bootstrap that imposes the null: resampled outcomes
are linear fitted values plus sign-flipped residuals from the restricted,
no-threshold regression.  Regressors never change under this scheme, so the
cross-sectional-average projections are identical across replicates and are
reused; the statistic itself is recomputed in full.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .cce import default_bandwidth, min_regime_count
from .errors import IdentificationError, PanelThreshError
from .panel import PanelDataset, Projector, RegimeDirection, regime_indicator
from .threshold import COND_MAX, GammaGrid, GridSource

logger = logging.getLogger(__name__)

_ORTH_RCOND = 1e-10


class TestScope(enum.Enum):
    UNIT = "unit"
    POOLED = "pooled"

    __test__ = False  # not a pytest collection target


@dataclass
class TestReport:
    """Sup-Wald statistic with (optionally) its bootstrap distribution."""

    __test__ = False  # not a pytest collection target

    statistic: float
    grid: GammaGrid
    per_gamma_wald: np.ndarray
    scope: TestScope
    unit: int | None = None
    p_value: float | None = None
    n_boot: int = 0
    boot_stats: np.ndarray = field(default_factory=lambda: np.empty(0))
    seed: int | None = None
    n_dropped: int = 0
    status: str = "ok"


def _orthobasis(stacked: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column space, batch-safe under rank deficiency.

    Left singular vectors with negligible singular values are zeroed so the
    output keeps a fixed shape and Q Q' is exactly the projection onto the
    numerically retained space.
    """
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    cutoff = s.max(axis=-1, keepdims=True) * _ORTH_RCOND
    keep = s > cutoff
    return np.where(keep[..., None, :], u, 0.0)


def _wald_from_pieces(delta, vmat, scale):
    """scale * d' V^-1 d for stacked (G, r) deltas; NaN where V is singular.

    A zero delta gives a zero statistic regardless of V (the quadratic form
    vanishes in the limit), matching the degenerate engineered case.
    """
    g, r = delta.shape
    wald = np.full(g, np.nan)
    zero = np.all(delta == 0.0, axis=1)
    wald[zero] = 0.0
    todo = ~zero
    if todo.any():
        eig = np.linalg.eigvalsh(vmat[todo])
        ok = (eig[:, -1] > 0) & (eig[:, 0] > eig[:, -1] / COND_MAX)
        idx = np.flatnonzero(todo)[ok]
        if idx.size:
            sol = np.linalg.solve(vmat[idx], delta[idx][:, :, None])[:, :, 0]
            wald[idx] = scale * np.maximum(np.einsum("gi,gi->g", delta[idx], sol), 0.0)
    return wald


def _bartlett_meat(eps: np.ndarray, wdot: np.ndarray, lags: int) -> np.ndarray:
    """K0 + sum_j (1 - j/(p+1)) (Kj + Kj') over stacked grids.

    eps: (G, T) residuals, wdot: (G, T, r) residualised regime regressors.
    """
    t = eps.shape[1]
    meat = np.einsum("gt,gtr,gts->grs", eps**2, wdot, wdot) / t
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        kj = np.einsum("gt,gt,gtr,gts->grs", eps[:, j:], eps[:, :-j], wdot[:, j:], wdot[:, :-j]) / t
        meat += w * (kj + np.swapaxes(kj, 1, 2))
    return meat


class UnitWaldWorkspace:
    """Per-gamma pieces of one unit's sup-Wald that do not depend on y."""

    def __init__(
        self,
        x_i: np.ndarray,
        q_i: np.ndarray,
        proj: Projector,
        grid: GammaGrid,
        selection: np.ndarray,
        direction: RegimeDirection,
        lag_trunc: int | None = None,
        min_per_regime: int | None = None,
    ):
        x_i = np.asarray(x_i, dtype=float)
        q_i = np.asarray(q_i, dtype=float)
        sel = np.asarray(selection, dtype=bool)
        t, k = x_i.shape
        r = int(sel.sum())
        need = min_regime_count(k, r) if min_per_regime is None else min_per_regime
        self.grid = grid
        self.t = t
        self.lags = default_bandwidth(t) if lag_trunc is None else int(lag_trunc)
        if self.lags < 0 or self.lags >= t:
            raise PanelThreshError("lag truncation must lie in [0, T)")

        gvals = grid.values
        w_full = x_i[:, sel]
        ind = np.stack([regime_indicator(q_i, g, direction) for g in gvals])
        counts = ind.sum(axis=1)
        self.feasible = (counts >= need) & (t - counts >= need)

        everything_else = np.hstack([proj.basis, x_i])
        self.q_basis = _orthobasis(everything_else)
        w_masked = w_full[None, :, :] * ind[:, :, None]
        qt_w = np.einsum("ts,gtr->gsr", self.q_basis, w_masked)
        self.w_dot = w_masked - np.einsum("ts,gsr->gtr", self.q_basis, qt_w)
        self.gram = np.einsum("gtr,gts->grs", self.w_dot, self.w_dot)
        # regime regressors fully inside the nuisance span leave only
        # rounding-level residual content; treat those points as unidentified
        raw_scale = np.einsum("gtr,gtr->g", w_masked, w_masked)
        self.feasible &= np.einsum("gtr,gtr->g", self.w_dot, self.w_dot) > 1e-12 * raw_scale
        idx = np.flatnonzero(self.feasible)
        if idx.size:
            eig = np.linalg.eigvalsh(self.gram[idx])
            ok = eig[:, 0] > eig[:, -1] / COND_MAX
            self.feasible[idx[~ok]] = False
        if not self.feasible.any():
            raise IdentificationError("no identified grid point for the unit Wald test")

    def per_gamma(self, y_i: np.ndarray) -> np.ndarray:
        y_i = np.asarray(y_i, dtype=float)
        y_dot = y_i - self.q_basis @ (self.q_basis.T @ y_i)
        if np.linalg.norm(y_dot) <= 1e-10 * np.linalg.norm(y_i):
            # outcome numerically inside the nuisance span: quadratic form at zero
            out = np.full(len(self.grid), np.nan)
            out[self.feasible] = 0.0
            return out
        idx = np.flatnonzero(self.feasible)
        wdot = self.w_dot[idx]
        rhs = np.einsum("gtr,t->gr", wdot, y_dot)
        delta = np.linalg.solve(self.gram[idx], rhs[:, :, None])[:, :, 0]
        eps = y_dot[None, :] - np.einsum("gtr,gr->gt", wdot, delta)
        sigma = self.gram[idx] / self.t
        meat = _bartlett_meat(eps, wdot, self.lags)
        inner = np.linalg.solve(sigma, meat)
        vmat = np.linalg.solve(sigma, np.swapaxes(inner, 1, 2))
        vmat = 0.5 * (vmat + np.swapaxes(vmat, 1, 2))
        out = np.full(len(self.grid), np.nan)
        out[idx] = _wald_from_pieces(delta, vmat, self.t)
        return out

    def statistic(self, y_i: np.ndarray) -> tuple[float, np.ndarray]:
        per_gamma = self.per_gamma(y_i)
        if not np.isfinite(per_gamma).any():
            raise IdentificationError("variance singular at every grid point")
        return float(np.nanmax(per_gamma)), per_gamma


def sup_wald_unit(
    x_i: np.ndarray,
    y_i: np.ndarray,
    q_i: np.ndarray,
    proj: Projector,
    grid: GammaGrid,
    selection: np.ndarray,
    direction: RegimeDirection = RegimeDirection.LOW_REGIME_LEQ,
    lag_trunc: int | None = None,
    unit: int | None = None,
) -> TestReport:
    """Supremum over the grid of the per-unit threshold Wald statistic.

    Grid points with a singular variance are skipped (NaN in
    per_gamma_wald); the report carries no p-value until a bootstrap is run.
    """
    ws = UnitWaldWorkspace(x_i, q_i, proj, grid, selection, direction, lag_trunc)
    stat, per_gamma = ws.statistic(y_i)
    return TestReport(
        statistic=stat, grid=grid, per_gamma_wald=per_gamma, scope=TestScope.UNIT, unit=unit
    )


class PooledWaldWorkspace:
    """Per-gamma projections for the pooled sup-Wald, reusable across outcomes.

    Stores, for each grid point, the orthonormal basis of each unit's
    nuisance block (cross-sectional averages, averaged masked regressors,
    own regressors) and the residualised regime regressors.  Memory grows
    with grid size x N x T; thin the grid for bootstrap work.
    """

    def __init__(
        self,
        panel: PanelDataset,
        proj: Projector,
        grid: GammaGrid,
    ):
        self.grid = grid
        self.n = panel.n_units
        self.t = panel.n_periods
        sel = panel.selection
        x_sel = panel.x[:, :, sel]
        basis = proj.basis
        self.q_bases: list[np.ndarray] = []
        self.w_dots: list[np.ndarray] = []
        self.grams: list[np.ndarray | None] = []
        feasible = np.zeros(len(grid), dtype=bool)
        for gi, gamma in enumerate(grid.values):
            ind = regime_indicator(panel.q, gamma, panel.direction)  # (T, N)
            w = x_sel * ind.T[:, :, None]                            # (N, T, r)
            w_bar = w.mean(axis=0)                                   # (T, r)
            fixed = np.concatenate(
                [
                    np.broadcast_to(basis, (self.n,) + basis.shape),
                    np.broadcast_to(w_bar, (self.n,) + w_bar.shape),
                    panel.x,
                ],
                axis=2,
            )
            q_basis = _orthobasis(fixed)
            w_dot = w - np.einsum("nts,nsr->ntr", q_basis, np.einsum("nts,ntr->nsr", q_basis, w))
            gram = np.einsum("ntr,nts->rs", w_dot, w_dot)
            eig = np.linalg.eigvalsh(gram)
            raw_scale = float(np.einsum("ntr,ntr->", w, w))
            ok = bool(
                eig[-1] > 1e-12 * raw_scale and eig[0] > eig[-1] / COND_MAX
            )
            feasible[gi] = ok
            self.q_bases.append(q_basis)
            self.w_dots.append(w_dot)
            self.grams.append(gram if ok else None)
        self.feasible = feasible
        if not feasible.any():
            raise IdentificationError("pooled design singular at every grid point")

    def _pieces(self, y_units: np.ndarray, gi: int):
        """(delta, vmat, y_dot) at grid point gi for a stacked (N, T) outcome."""
        if self.grams[gi] is None:
            raise IdentificationError(
                f"pooled design singular at gamma={self.grid.values[gi]}"
            )
        q_basis, w_dot, gram = self.q_bases[gi], self.w_dots[gi], self.grams[gi]
        qty = np.einsum("nts,nt->ns", q_basis, y_units)
        y_dot = y_units - np.einsum("nts,ns->nt", q_basis, qty)
        rhs = np.einsum("ntr,nt->r", w_dot, y_dot)
        delta = np.linalg.solve(gram, rhs)
        eps = y_dot - np.einsum("ntr,r->nt", w_dot, delta)
        nt = self.n * self.t
        sigma = gram / nt
        meat = np.einsum("nt,ntr,nts->rs", eps**2, w_dot, w_dot) / nt
        inner = np.linalg.solve(sigma, meat)
        vmat = np.linalg.solve(sigma, inner.T).T
        return delta, 0.5 * (vmat + vmat.T), y_dot

    def delta_and_variance(self, ymat: np.ndarray, gi: int) -> tuple[np.ndarray, np.ndarray]:
        """Pooled regime-difference estimate and its sandwich at grid point gi."""
        y_units = np.ascontiguousarray(np.asarray(ymat, dtype=float).T)  # (N, T)
        delta, vmat, _ = self._pieces(y_units, gi)
        return delta, vmat

    def per_gamma(self, ymat: np.ndarray) -> np.ndarray:
        nt = self.n * self.t
        y_units = np.ascontiguousarray(np.asarray(ymat, dtype=float).T)
        y_scale = np.linalg.norm(y_units)
        out = np.full(len(self.grid), np.nan)
        for gi in np.flatnonzero(self.feasible):
            delta, vmat, y_dot = self._pieces(y_units, gi)
            if np.linalg.norm(y_dot) <= 1e-10 * y_scale:
                # outcome numerically inside the nuisance span at this point
                out[gi] = 0.0
                continue
            out[gi] = _wald_from_pieces(delta[None, :], vmat[None, :, :], nt)[0]
        return out

    def statistic(self, ymat: np.ndarray) -> tuple[float, np.ndarray]:
        per_gamma = self.per_gamma(ymat)
        if not np.isfinite(per_gamma).any():
            raise IdentificationError("variance singular at every pooled grid point")
        return float(np.nanmax(per_gamma)), per_gamma


def pooled_delta(
    panel: PanelDataset,
    gamma: float,
    proj: Projector,
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled regime-difference estimate at one threshold and its variance.

    The variance is normalised for sqrt(N T)(d_p - d); squared standard
    errors are diag(variance) / (N T).
    """
    grid = GammaGrid(
        values=np.array([float(gamma)]),
        trim_lo=0.0,
        trim_hi=0.0,
        source=GridSource.POOLED_COMMON_SUPPORT,
    )
    ws = PooledWaldWorkspace(panel, proj, grid)
    return ws.delta_and_variance(panel.y, 0)


def sup_wald_pooled(
    panel: PanelDataset,
    proj: Projector,
    grid: GammaGrid,
) -> TestReport:
    """Supremum over the grid of the pooled threshold Wald statistic."""
    ws = PooledWaldWorkspace(panel, proj, grid)
    stat, per_gamma = ws.statistic(panel.y)
    return TestReport(
        statistic=stat, grid=grid, per_gamma_wald=per_gamma, scope=TestScope.POOLED
    )


@dataclass(frozen=True)
class NullLinearFit:
    """Restricted (no-threshold) projected regression, per unit.

    fitted + residuals reassemble the projected outcome; resampling flips
    residual signs around the fitted values, which imposes the null while
    preserving each observation's error scale.
    """

    fitted: np.ndarray      # (T, N)
    residuals: np.ndarray   # (T, N)
    betas: np.ndarray       # (N, K)


def fit_linear_null(panel: PanelDataset, proj: Projector) -> NullLinearFit:
    """Per-unit least squares of the projected outcome on projected regressors."""
    n, t, k = panel.x.shape
    fitted = np.empty((t, n))
    resid = np.empty((t, n))
    betas = np.empty((n, k))
    y_t = proj.apply(panel.y)
    for i in range(n):
        x_t = proj.apply(panel.x[i])
        beta, _, rank, _ = np.linalg.lstsq(x_t, y_t[:, i], rcond=_ORTH_RCOND)
        if rank < k:
            raise IdentificationError(f"unit {i}: restricted design is rank deficient")
        betas[i] = beta
        fitted[:, i] = x_t @ beta
        resid[:, i] = y_t[:, i] - fitted[:, i]
    return NullLinearFit(fitted=fitted, residuals=resid, betas=betas)


def _replicate_rng(seed: int, b: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(b))))


def wild_bootstrap_pvalue(
    statistic_fn,
    null_fit: NullLinearFit,
    report: TestReport,
    n_boot: int = 299,
    seed: int = 0,
) -> TestReport:
    """Attach a wild-bootstrap p-value to a sup-Wald report.

    statistic_fn maps a resampled outcome array (same shape as
    null_fit.fitted, or one column of it for unit scope) to the statistic.
    Each replicate draws independent Rademacher signs per observation,
    forms y* = fitted + sign * residual, and recomputes the statistic in
    full.  Failed replicates are dropped and counted; more than 10% drops
    downgrades the status to a warning.  p = (1 + #{b: stat_b >= stat}) /
    (B_ok + 1).
    """
    if n_boot < 99:
        raise PanelThreshError("n_boot must be at least 99")
    if report.scope is TestScope.UNIT:
        if report.unit is None:
            raise PanelThreshError("unit-scope report must carry its unit index")
        fitted = null_fit.fitted[:, report.unit]
        resid = null_fit.residuals[:, report.unit]
    else:
        fitted = null_fit.fitted
        resid = null_fit.residuals

    stats = []
    dropped = 0
    for b in range(n_boot):
        rng = _replicate_rng(seed, b)
        signs = rng.integers(0, 2, size=resid.shape) * 2.0 - 1.0
        y_star = fitted + signs * resid
        try:
            stats.append(statistic_fn(y_star))
        except (IdentificationError, np.linalg.LinAlgError) as exc:
            dropped += 1
            logger.debug("bootstrap replicate %d dropped: %s", b, exc)
    boot = np.asarray(stats, dtype=float)
    if boot.size == 0:
        raise IdentificationError("every bootstrap replicate failed")
    p_value = (1.0 + float((boot >= report.statistic).sum())) / (boot.size + 1.0)
    status = "ok"
    if dropped > 0.1 * n_boot:
        status = f"warning: {dropped}/{n_boot} bootstrap replicates dropped"
        logger.warning(status)
    return TestReport(
        statistic=report.statistic,
        grid=report.grid,
        per_gamma_wald=report.per_gamma_wald,
        scope=report.scope,
        unit=report.unit,
        p_value=p_value,
        n_boot=int(boot.size),
        boot_stats=boot,
        seed=seed,
        n_dropped=dropped,
        status=status,
    )


def linearity_test_unit(
    x_i: np.ndarray,
    y_i: np.ndarray,
    q_i: np.ndarray,
    proj: Projector,
    grid: GammaGrid,
    selection: np.ndarray,
    direction: RegimeDirection = RegimeDirection.LOW_REGIME_LEQ,
    n_boot: int = 299,
    seed: int = 0,
    lag_trunc: int | None = None,
    unit: int | None = None,
) -> TestReport:
    """Unit sup-Wald with wild-bootstrap p-value (projection reused across
    replicates; the regressors, hence the averages, are fixed under the
    resampling scheme)."""
    ws = UnitWaldWorkspace(x_i, q_i, proj, grid, selection, direction, lag_trunc)
    stat, per_gamma = ws.statistic(y_i)
    report = TestReport(
        statistic=stat, grid=grid, per_gamma_wald=per_gamma, scope=TestScope.UNIT, unit=unit
    )
    x_t = proj.apply(x_i)
    y_t = proj.apply(y_i)
    beta, _, rank, _ = np.linalg.lstsq(x_t, y_t, rcond=_ORTH_RCOND)
    if rank < x_i.shape[1]:
        raise IdentificationError("restricted design is rank deficient")
    fitted = (x_t @ beta)[:, None]
    resid = (y_t - fitted[:, 0])[:, None]
    null_fit = NullLinearFit(fitted=fitted, residuals=resid, betas=beta[None, :])
    report_for_boot = TestReport(
        statistic=stat, grid=grid, per_gamma_wald=per_gamma, scope=TestScope.UNIT, unit=0
    )
    out = wild_bootstrap_pvalue(
        lambda y_star: ws.statistic(y_star)[0], null_fit, report_for_boot, n_boot, seed
    )
    out.unit = unit
    return out


def linearity_test_pooled(
    panel: PanelDataset,
    proj: Projector,
    grid: GammaGrid,
    n_boot: int = 299,
    seed: int = 0,
) -> TestReport:
    """Pooled sup-Wald with wild-bootstrap p-value."""
    ws = PooledWaldWorkspace(panel, proj, grid)
    stat, per_gamma = ws.statistic(panel.y)
    report = TestReport(
        statistic=stat, grid=grid, per_gamma_wald=per_gamma, scope=TestScope.POOLED
    )
    null_fit = fit_linear_null(panel, proj)
    return wild_bootstrap_pvalue(
        lambda y_star: ws.statistic(y_star)[0], null_fit, report, n_boot, seed
    )
