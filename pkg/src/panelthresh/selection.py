"""Modified BIC for choosing between per-unit and common thresholds.

score = log(sigma2) + [log(T) / (N T)] * K1 + [log(N T) / (N T)] * K2

K1 counts parameters that are heterogeneous across units, K2 parameters
pooled across units.  The fully heterogeneous model has K1 = N(K + r + 1)
(slopes, regime differences, and one threshold per unit) and K2 = 0; with a
common threshold, K1 = N(K + r) and K2 = 1.  The criterion remains
comparable when the two models use different threshold variables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .cce import UnitFit
from .errors import PanelThreshError
from .threshold import PooledFit

TIE_TOL = 1e-12


class ModelChoice(enum.Enum):
    FULLY_HETEROGENEOUS = "fully_heterogeneous"
    SEMI_HOMOGENEOUS = "semi_homogeneous"


@dataclass(frozen=True)
class MbicScore:
    sigma2: float
    k1: int
    k2: int
    penalty1: float
    penalty2: float
    score: float


def _score(sigma2: float, k1: int, k2: int, n: int, t: int) -> MbicScore:
    if sigma2 <= 0.0:
        raise PanelThreshError(f"error-variance estimate must be positive, got {sigma2}")
    nt = n * t
    penalty1 = math.log(t) / nt
    penalty2 = math.log(nt) / nt
    return MbicScore(
        sigma2=float(sigma2),
        k1=k1,
        k2=k2,
        penalty1=penalty1,
        penalty2=penalty2,
        score=math.log(sigma2) + penalty1 * k1 + penalty2 * k2,
    )


def mbic_heterogeneous(
    fits: list[UnitFit], n_units: int, n_periods: int, k_regressors: int, n_threshold: int
) -> MbicScore:
    """Criterion for the per-unit-threshold model.

    sigma2 is the average of the per-unit error-variance estimates
    (equivalently, total RSS over N T when every unit has T periods).
    """
    if len(fits) != n_units or any(f is None for f in fits):
        raise PanelThreshError("all units must be fitted for the information criterion")
    sigma2 = float(np.mean([f.sigma2_eps for f in fits]))
    k1 = n_units * (k_regressors + n_threshold + 1)
    return _score(sigma2, k1, 0, n_units, n_periods)


def mbic_semi(
    pooled: PooledFit, n_units: int, n_periods: int, k_regressors: int, n_threshold: int
) -> MbicScore:
    """Criterion for the common-threshold model; sigma2 = total RSS / (N T)."""
    sigma2 = pooled.total_rss / (n_units * n_periods)
    k1 = n_units * (k_regressors + n_threshold)
    return _score(sigma2, k1, 1, n_units, n_periods)


@dataclass(frozen=True)
class SelectionResult:
    choice: ModelChoice
    margin: float
    tie: bool
    score_heterogeneous: MbicScore
    score_semi: MbicScore


def select_model(score_het: MbicScore, score_semi: MbicScore) -> SelectionResult:
    """Pick the smaller score; ties go to the common-threshold model."""
    for s in (score_het.score, score_semi.score):
        if not math.isfinite(s):
            raise PanelThreshError("scores must be finite")
    diff = score_het.score - score_semi.score
    tie = abs(diff) < TIE_TOL
    if tie or diff > 0:
        choice = ModelChoice.SEMI_HOMOGENEOUS
    else:
        choice = ModelChoice.FULLY_HETEROGENEOUS
    return SelectionResult(
        choice=choice,
        margin=abs(diff),
        tie=tie,
        score_heterogeneous=score_het,
        score_semi=score_semi,
    )
