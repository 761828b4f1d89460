"""Per-unit regression at a fixed threshold, after factor projection.

Everything here works on one unit's data.  The design is z = [x | w(gamma)]
with w(gamma) the regime-masked selected regressors; both the design and the
outcome are premultiplied by the annihilator of the cross-sectional averages
before least squares.  Linear systems are solved through an orthogonal
decomposition (lstsq) with a relative rank cutoff of 1e-10 times the largest
singular value, never by forming explicit inverses of the design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IdentificationError, PanelThreshError
from .panel import Projector, RegimeDirection, regime_split

RANK_RCOND = 1e-10


@dataclass
class UnitFit:
    """One unit's estimate at a threshold value.

    theta stacks the base slopes (first K entries) and the regime
    difference (last r entries).  vcov is the sandwich variance of
    sqrt(T) * (theta_hat - theta), so squared standard errors are
    diag(vcov) / T.  sigma2_eps = rss / T.
    """

    gamma: float
    theta: np.ndarray
    rss: float
    residuals: np.ndarray
    vcov: np.ndarray
    sigma2_eps: float
    n_regressors: int
    n_low: int
    n_high: int
    vcov_kind: str = "hc"

    @property
    def beta(self) -> np.ndarray:
        return self.theta[: self.n_regressors]

    @property
    def delta(self) -> np.ndarray:
        return self.theta[self.n_regressors:]

    @property
    def n_periods(self) -> int:
        return self.residuals.shape[0]

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vcov) / self.n_periods)


def min_regime_count(k: int, r: int) -> int:
    """Fewest per-regime observations for a fit to be attempted.

    One more than the coefficient count, so the stacked design can have
    full column rank regardless of how the regimes split.
    """
    return k + r + 1


def cce_fit_given_gamma(
    x_i: np.ndarray,
    y_i: np.ndarray,
    q_i: np.ndarray,
    gamma: float,
    proj: Projector,
    selection: np.ndarray,
    direction: RegimeDirection = RegimeDirection.LOW_REGIME_LEQ,
    vcov: str = "hc",
    bandwidth: int | None = None,
    min_per_regime: int | None = None,
) -> UnitFit:
    """Least squares of the projected outcome on the projected design at gamma.

    Raises IdentificationError when either regime has too few observations
    or the projected design is rank deficient.
    """
    x_i = np.asarray(x_i, dtype=float)
    y_i = np.asarray(y_i, dtype=float)
    t, k = x_i.shape
    sel = np.asarray(selection, dtype=bool)
    r = int(sel.sum())
    need = min_regime_count(k, r) if min_per_regime is None else min_per_regime

    regs = regime_split(x_i, q_i, gamma, sel, direction)
    if direction is RegimeDirection.LOW_REGIME_LEQ:
        n_low = int((np.asarray(q_i) <= gamma).sum())
    else:
        n_low = int((np.asarray(q_i) >= gamma).sum())
    n_high = t - n_low
    if n_low < need or n_high < need:
        raise IdentificationError(
            f"gamma={gamma}: regime counts ({n_low}, {n_high}) below minimum {need}"
        )

    z_tilde = proj.apply(regs.z)
    y_tilde = proj.apply(y_i)
    theta, _, rank, _ = np.linalg.lstsq(z_tilde, y_tilde, rcond=RANK_RCOND)
    if rank < k + r:
        raise IdentificationError(
            f"gamma={gamma}: projected design rank {rank} < {k + r} parameters"
        )
    residuals = y_tilde - z_tilde @ theta
    rss = float(residuals @ residuals)
    fit = UnitFit(
        gamma=float(gamma),
        theta=theta,
        rss=rss,
        residuals=residuals,
        vcov=np.zeros((k + r, k + r)),
        sigma2_eps=rss / t,
        n_regressors=k,
        n_low=n_low,
        n_high=n_high,
        vcov_kind=vcov,
    )
    if vcov == "hc":
        fit.vcov = variance_hc(fit, z_tilde)
    elif vcov == "hac":
        fit.vcov = variance_hac(fit, z_tilde, bandwidth)
    else:
        raise PanelThreshError(f"unknown vcov kind {vcov!r}")
    return fit


def _bread(z_tilde: np.ndarray) -> np.ndarray:
    t = z_tilde.shape[0]
    sigma = z_tilde.T @ z_tilde / t
    sv = np.linalg.svd(sigma, compute_uv=False)
    if sv[-1] <= sv[0] * RANK_RCOND or sv[0] == 0.0:
        raise IdentificationError("design second-moment matrix is singular")
    return sigma


def variance_hc(fit: UnitFit, z_tilde: np.ndarray) -> np.ndarray:
    """Heteroskedasticity-robust sandwich for sqrt(T)(theta_hat - theta).

    meat = T^-1 z' diag(e e') z with e the fit residuals; the bread is the
    inverse of T^-1 z'z applied by linear solves.
    """
    t = z_tilde.shape[0]
    sigma = _bread(z_tilde)
    ze = z_tilde * fit.residuals[:, None]
    meat = ze.T @ ze / t
    inner = np.linalg.solve(sigma, meat)
    v = np.linalg.solve(sigma, inner.T).T
    return 0.5 * (v + v.T)


def default_bandwidth(t: int) -> int:
    return int(math.floor(t ** 0.25))


def variance_hac(fit: UnitFit, z_tilde: np.ndarray, bandwidth: int | None = None) -> np.ndarray:
    """Newey-West sandwich with Bartlett weights 1 - j/b, lags j < b.

    bandwidth defaults to floor(T^(1/4)); bandwidth 1 reproduces the
    heteroskedasticity-only estimator exactly.
    """
    t = z_tilde.shape[0]
    b = default_bandwidth(t) if bandwidth is None else int(bandwidth)
    if b < 1:
        raise PanelThreshError("bandwidth must be >= 1")
    if b >= t:
        raise PanelThreshError(f"bandwidth {b} must be smaller than T={t}")
    sigma = _bread(z_tilde)
    ze = z_tilde * fit.residuals[:, None]
    meat = ze.T @ ze / t
    for j in range(1, b):
        w = 1.0 - j / b
        s_j = ze[j:].T @ ze[:-j] / t
        meat += w * (s_j + s_j.T)
    inner = np.linalg.solve(sigma, meat)
    v = np.linalg.solve(sigma, inner.T).T
    return 0.5 * (v + v.T)
