"""Synthetic panel generator with known truth, for Monte Carlo validation.

The generated outcome is

    y_it = beta_i' x_it + delta_i' w_it 1{q_it <= gamma_i} + lambda_i' f_t + eps_it
    x_it = Pi_i' f_t + xi_it,            w_it = selected columns of x_it

with per-unit threshold effects delta_i = C_0i * T^(-alpha_i), C_0i = c0 + C_vi,
so the regime difference shrinks with the sample at a controlled per-unit rate.
Slopes follow a random-coefficient law beta_i = beta + v_i.  The threshold
variable is one of the regressors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import PanelThreshError
from .panel import PanelDataset, RegimeDirection

_MAX_REDRAWS = 1000


def _per_unit(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise PanelThreshError(f"{name} must be scalar or length {n}, got shape {arr.shape}")
    return arr.copy()


@dataclass(frozen=True)
class DgpConfig:
    """Generator truth knobs.

    beta_mean/beta_dispersion define the random-coefficient law for the
    slopes; c0/c_dispersion the law of the threshold-effect scale C_0i;
    alpha the per-unit shrink exponents in [0, 1/2) (0 = fixed magnitude).
    m_factors must satisfy the rank condition m <= K.  sigma_eps is the
    marginal standard deviation of the idiosyncratic error; ar1_rho adds
    serial correlation while preserving that marginal variance.
    """

    n_units: int
    n_periods: int
    k_regressors: int = 1
    selection: tuple[bool, ...] | None = None
    m_factors: int = 1
    beta_mean: tuple[float, ...] | float = 1.0
    beta_dispersion: float = 0.0
    c0: tuple[float, ...] | float = 1.0
    c_dispersion: float = 0.0
    alpha: float | tuple[float, ...] = 0.0
    gamma_true: float | tuple[float, ...] = 0.0
    lambda_range: tuple[float, float] = (0.5, 1.5)
    pi_range: tuple[float, float] = (0.5, 1.5)
    sigma_eps: float = 1.0
    ar1_rho: float = 0.0
    threshold_source: int = 0
    seed: int = 0
    min_regime_frac: float = 0.05

    def selection_mask(self) -> np.ndarray:
        if self.selection is None:
            return np.ones(self.k_regressors, dtype=bool)
        mask = np.asarray(self.selection, dtype=bool)
        if mask.shape != (self.k_regressors,) or not mask.any():
            raise PanelThreshError("selection must be a K-length mask with at least one True")
        return mask

    def validate(self) -> None:
        if self.n_units < 1 or self.n_periods < 2 or self.k_regressors < 1:
            raise PanelThreshError("n_units, n_periods, k_regressors must be positive")
        if self.m_factors > self.k_regressors:
            raise PanelThreshError(
                f"rank condition violated: m_factors={self.m_factors} exceeds "
                f"k_regressors={self.k_regressors}"
            )
        if self.m_factors < 0:
            raise PanelThreshError("m_factors must be >= 0")
        if self.sigma_eps < 0 or self.beta_dispersion < 0 or self.c_dispersion < 0:
            raise PanelThreshError("dispersions and variances must be >= 0")
        if not -1.0 < self.ar1_rho < 1.0:
            raise PanelThreshError("ar1_rho must be in (-1, 1)")
        alphas = _per_unit(self.alpha, self.n_units, "alpha")
        if ((alphas < 0.0) | (alphas >= 0.5)).any():
            raise PanelThreshError("alpha exponents must lie in [0, 1/2)")
        if not 0 <= self.threshold_source < self.k_regressors:
            raise PanelThreshError("threshold_source out of regressor range")
        self.selection_mask()


@dataclass(frozen=True)
class DgpTruth:
    """Every drawn parameter, for scoring estimates against the truth."""

    beta: np.ndarray          # (N, K)
    delta: np.ndarray         # (N, r) realised threshold effects
    c0i: np.ndarray           # (N, r)
    gamma: np.ndarray         # (N,)
    alpha: np.ndarray         # (N,)
    loadings_y: np.ndarray    # (N, m) lambda_i
    loadings_x: np.ndarray    # (N, m, K) Pi_i
    factors: np.ndarray       # (T, m)
    sigma_eps: float
    ar1_rho: float
    seed: int
    theta_mean: np.ndarray = field(default=None)  # (K+r,) population (beta, delta) mean

    def as_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "delta": self.delta.tolist(),
            "c0i": self.c0i.tolist(),
            "gamma": self.gamma.tolist(),
            "alpha": self.alpha.tolist(),
            "loadings_y": self.loadings_y.tolist(),
            "loadings_x": self.loadings_x.tolist(),
            "sigma_eps": self.sigma_eps,
            "ar1_rho": self.ar1_rho,
            "seed": self.seed,
            "theta_mean": self.theta_mean.tolist(),
        }


def _draw_unit_x(rng, factors, pi_i, t, k):
    xi = rng.standard_normal((t, k))
    return factors @ pi_i + xi


def _ar1_noise(rng, t, n, sigma, rho):
    eps = rng.standard_normal((t, n)) * sigma
    if rho == 0.0 or sigma == 0.0:
        return eps
    # innovation scaled so the marginal variance stays sigma^2
    innov = eps * np.sqrt(1.0 - rho * rho)
    innov[0] = eps[0]
    return lfilter([1.0], [1.0, -rho], innov, axis=0)


def simulate(config: DgpConfig) -> tuple[PanelDataset, DgpTruth]:
    """Draw one panel.  Identical seed implies bit-identical output.

    Units whose threshold variable leaves fewer than max(5, 0.05 T)
    observations in either regime are redrawn (idiosyncratic part only),
    keeping the identification condition non-vacuous at desk scale.
    """
    config.validate()
    n, t, k, m = config.n_units, config.n_periods, config.k_regressors, config.m_factors
    sel = config.selection_mask()
    r = int(sel.sum())
    rng = np.random.default_rng(config.seed)

    factors = rng.standard_normal((t, m))
    lam = rng.uniform(*config.lambda_range, size=(n, m))
    pi = rng.uniform(*config.pi_range, size=(n, m, k))

    beta_mean = _per_unit(config.beta_mean, k, "beta_mean")
    beta = beta_mean[None, :] + config.beta_dispersion * rng.standard_normal((n, k))

    c0_mean = np.asarray(config.c0, dtype=float)
    c0_mean = np.full(r, float(c0_mean)) if c0_mean.ndim == 0 else c0_mean
    if c0_mean.shape != (r,):
        raise PanelThreshError(f"c0 must be scalar or length r={r}")
    c0i = c0_mean[None, :] + config.c_dispersion * rng.standard_normal((n, r))
    alphas = _per_unit(config.alpha, n, "alpha")
    delta = c0i * (float(t) ** -alphas)[:, None]
    gammas = _per_unit(config.gamma_true, n, "gamma_true")

    min_regime = max(5, int(np.ceil(config.min_regime_frac * t)))
    min_regime = min(min_regime, t // 2)
    src = config.threshold_source

    x = np.empty((n, t, k))
    for i in range(n):
        for attempt in range(_MAX_REDRAWS):
            cand = _draw_unit_x(rng, factors, pi[i], t, k)
            low = int((cand[:, src] <= gammas[i]).sum())
            if min_regime <= low <= t - min_regime:
                x[i] = cand
                break
        else:
            raise PanelThreshError(
                f"unit {i}: could not place gamma={gammas[i]} inside the support of q "
                f"after {_MAX_REDRAWS} redraws"
            )

    eps = _ar1_noise(rng, t, n, config.sigma_eps, config.ar1_rho)
    q = x[:, :, src].T
    y = np.empty((t, n))
    for i in range(n):
        ind = q[:, i] <= gammas[i]
        w = x[i][:, sel] * ind[:, None]
        y[:, i] = x[i] @ beta[i] + w @ delta[i] + factors @ lam[i] + eps[:, i]

    dataset = PanelDataset(
        y=y,
        x=x,
        q=q,
        unit_labels=[f"u{i:03d}" for i in range(n)],
        time_labels=[str(s + 1) for s in range(t)],
        selection=sel,
        direction=RegimeDirection.LOW_REGIME_LEQ,
    )
    theta_mean = np.concatenate([beta_mean, c0_mean * float(t) ** -float(np.mean(alphas))])
    truth = DgpTruth(
        beta=beta,
        delta=delta,
        c0i=c0i,
        gamma=gammas,
        alpha=alphas,
        loadings_y=lam,
        loadings_x=pi,
        factors=factors,
        sigma_eps=config.sigma_eps,
        ar1_rho=config.ar1_rho,
        seed=config.seed,
        theta_mean=theta_mean,
    )
    return dataset, truth


def regime_counts(panel: PanelDataset, gamma) -> np.ndarray:
    """Per-unit (firing, non-firing) period counts at the given threshold(s).

    gamma may be a scalar (common threshold) or a length-N vector.  A zero
    count means the unit's threshold effect is not identified there.
    """
    gammas = _per_unit(gamma, panel.n_units, "gamma")
    counts = np.empty((panel.n_units, 2), dtype=int)
    for i in range(panel.n_units):
        if panel.direction is RegimeDirection.LOW_REGIME_LEQ:
            low = int((panel.q[:, i] <= gammas[i]).sum())
        else:
            low = int((panel.q[:, i] >= gammas[i]).sum())
        counts[i] = (low, panel.n_periods - low)
    return counts
