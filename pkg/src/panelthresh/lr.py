"""Likelihood-ratio inference for the threshold parameter.

The statistic LR(gamma) = (RSS(gamma) - RSS(gamma_hat)) / sigma2 has, under a
shrinking threshold effect, a pivotal limit whose distribution function is
(1 - exp(-x/2))^2, so confidence sets come from inverting the closed-form
critical value c(a) = -2 log(1 - sqrt(1 - a)).  The same machinery serves the
per-unit thresholds (sigma2 = unit RSS / T) and the common threshold
(sigma2 = summed RSS / (N T)).

Under time-heteroskedastic errors the limit is scaled by a nuisance factor
eta2 >= 0; the default is the homoskedastic value 1, with an optional
kernel-smoothing plug-in provided as a clearly labelled substitute for the
estimator we do not reproduce exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PanelThreshError
from .threshold import GammaGrid

_SLACK = 1e-10


def lr_statistic(rss_at_gamma: float, rss_at_gamma_hat: float, sigma2_eps: float) -> float:
    """(RSS(gamma) - RSS(gamma_hat)) / sigma2, clipped at 0 within slack.

    gamma_hat is the RSS minimiser, so a numerator below -slack signals an
    internal inconsistency and raises.
    """
    if sigma2_eps <= 0.0:
        raise PanelThreshError("sigma2_eps must be positive")
    num = rss_at_gamma - rss_at_gamma_hat
    slack = _SLACK * max(1.0, abs(rss_at_gamma_hat))
    if num < -slack:
        raise PanelThreshError(
            f"RSS at candidate gamma ({rss_at_gamma}) is below the minimised "
            f"RSS ({rss_at_gamma_hat}) beyond numerical slack"
        )
    return max(num, 0.0) / sigma2_eps


def lr_cdf(x) -> np.ndarray | float:
    """Distribution function (1 - exp(-x/2))^2 of the pivotal limit."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, (1.0 - np.exp(-x / 2.0)) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


def lr_critical_value(level: float) -> float:
    """Inverse CDF at 1 - level: c(a) = -2 log(1 - sqrt(1 - a))."""
    if not 0.0 < level < 1.0:
        raise PanelThreshError(f"significance level must lie in (0, 1), got {level}")
    return -2.0 * math.log(1.0 - math.sqrt(1.0 - level))


@dataclass(frozen=True)
class LrProfile:
    """LR values over a grid and the inverted confidence set.

    confidence_set lists maximal runs of consecutive accepted grid points as
    (low, high) value pairs; disconnected sets are reported as-is.  lr_values
    is NaN at grid points skipped for identification.
    """

    grid: GammaGrid
    lr_values: np.ndarray
    gamma_hat: float
    eta2: float
    level: float
    critical: float
    confidence_set: list[tuple[float, float]]

    @property
    def accepted(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.asarray(self.lr_values <= self.eta2 * self.critical)

    def covers(self, gamma: float) -> bool:
        """Whether gamma lies inside one of the accepted grid runs."""
        return any(lo <= gamma <= hi for lo, hi in self.confidence_set)


def _runs(grid_values: np.ndarray, accepted: np.ndarray) -> list[tuple[float, float]]:
    runs: list[tuple[float, float]] = []
    start = None
    for j, ok in enumerate(accepted):
        if ok and start is None:
            start = j
        elif not ok and start is not None:
            runs.append((float(grid_values[start]), float(grid_values[j - 1])))
            start = None
    if start is not None:
        runs.append((float(grid_values[start]), float(grid_values[-1])))
    return runs


def lr_confidence_set(
    grid: GammaGrid,
    rss_values: np.ndarray,
    sigma2_eps: float,
    level: float = 0.05,
    eta2: float = 1.0,
) -> LrProfile:
    """Invert the LR test over the grid: keep gamma with LR <= eta2 * c(a).

    rss_values must align with grid.values (NaN = skipped point).  The
    noiseless degenerate case sigma2_eps == 0 with a flat RSS profile yields
    LR identically 0 (the whole grid is accepted).
    """
    if eta2 <= 0.0:
        raise PanelThreshError("eta2 must be positive")
    rss_values = np.asarray(rss_values, dtype=float)
    if rss_values.shape != grid.values.shape:
        raise PanelThreshError("rss_values must align with the grid")
    if not np.isfinite(rss_values).any():
        raise PanelThreshError("no feasible grid point to invert")
    best = int(np.nanargmin(rss_values))
    rss_min = float(rss_values[best])
    with np.errstate(invalid="ignore"):
        num = np.maximum(rss_values - rss_min, 0.0)
    if sigma2_eps > 0.0:
        lr_values = num / sigma2_eps
    else:
        slack = _SLACK * max(1.0, rss_min)
        lr_values = np.where(num <= slack, 0.0, np.inf)
        lr_values[np.isnan(num)] = np.nan
    crit = lr_critical_value(level)
    with np.errstate(invalid="ignore"):
        accepted = lr_values <= eta2 * crit
    return LrProfile(
        grid=grid,
        lr_values=lr_values,
        gamma_hat=float(grid.values[best]),
        eta2=eta2,
        level=level,
        critical=crit,
        confidence_set=_runs(grid.values, accepted),
    )


def estimate_eta2(
    w_i: np.ndarray,
    q_i: np.ndarray,
    residuals: np.ndarray,
    delta_hat: np.ndarray,
    gamma_hat: float,
    sigma2_eps: float,
    bandwidth: float | None = None,
) -> float:
    """Kernel plug-in for the heteroskedasticity scale eta2 = V / (sigma2 D).

    Substitute estimator (not the original one): Nadaraya-Watson smoothing
    of (delta_hat'w)^2 eps^2 and (delta_hat'w)^2 against q at gamma_hat with
    a Gaussian kernel and normal-reference bandwidth.  The unknown scale of
    the threshold direction cancels in the ratio.
    """
    if sigma2_eps <= 0.0:
        raise PanelThreshError("sigma2_eps must be positive")
    w_i = np.asarray(w_i, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    t = q_i.shape[0]
    if bandwidth is None:
        spread = float(np.std(q_i))
        bandwidth = 1.06 * (spread if spread > 0 else 1.0) * t ** (-1 / 5)
    proj2 = (w_i @ np.asarray(delta_hat, dtype=float)) ** 2
    kern = np.exp(-0.5 * ((q_i - gamma_hat) / bandwidth) ** 2)
    denom = float(kern @ proj2)
    if denom <= 0.0:
        raise PanelThreshError("eta2 plug-in undefined: no kernel mass at gamma_hat")
    numer = float(kern @ (proj2 * residuals**2))
    return numer / (sigma2_eps * denom)
