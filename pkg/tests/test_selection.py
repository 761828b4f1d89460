"""MBIC scores and model choice."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from panelthresh import (
    MbicScore,
    ModelChoice,
    PanelThreshError,
    mbic_heterogeneous,
    mbic_semi,
    select_model,
)
from panelthresh.cce import UnitFit
from panelthresh.threshold import GammaGrid, GridSource, PooledFit


def dummy_fit(sigma2=1.0, t=50, k=2, r=1):
    return UnitFit(
        gamma=0.0, theta=np.zeros(k + r), rss=sigma2 * t,
        residuals=np.zeros(t), vcov=np.zeros((k + r, k + r)),
        sigma2_eps=sigma2, n_regressors=k, n_low=t // 2, n_high=t - t // 2,
    )


def dummy_pooled(total_rss, n=45, t=50, k=2, r=1):
    fits = [dummy_fit(total_rss / (n * t), t, k, r) for _ in range(n)]
    grid = GammaGrid(
        values=np.array([0.0, 1.0, 2.0]), trim_lo=0.0, trim_hi=0.0,
        source=GridSource.POOLED_COMMON_SUPPORT,
    )
    return PooledFit(
        gamma=1.0, unit_fits=fits, theta_mg=np.zeros(k + r),
        sigma_mg=np.eye(k + r), total_rss=total_rss, grid=grid,
        pooled_rss=np.array([1.0, 0.5, 1.0]), skipped=np.zeros(3, dtype=bool),
    )


class TestCounts:
    def test_heterogeneous_parameter_count(self):
        fits = [dummy_fit() for _ in range(45)]
        score = mbic_heterogeneous(fits, 45, 50, 2, 1)
        assert score.k1 == 180 and score.k2 == 0

    def test_semi_parameter_count(self):
        score = mbic_semi(dummy_pooled(2250.0), 45, 50, 2, 1)
        assert score.k1 == 135 and score.k2 == 1

    def test_penalties(self):
        score = mbic_semi(dummy_pooled(2250.0), 45, 50, 2, 1)
        assert_allclose(score.penalty1, math.log(50) / 2250)
        assert_allclose(score.penalty2, math.log(2250) / 2250)


class TestScoreArithmetic:
    def test_unit_sigma_score_is_pure_penalty(self):
        fits = [dummy_fit(sigma2=1.0) for _ in range(45)]
        score = mbic_heterogeneous(fits, 45, 50, 2, 1)
        assert_allclose(score.score, score.penalty1 * 180)

    def test_score_identity(self):
        score = mbic_semi(dummy_pooled(4500.0), 45, 50, 2, 1)
        assert_allclose(
            score.score,
            math.log(score.sigma2) + score.penalty1 * score.k1 + score.penalty2 * score.k2,
        )

    def test_equal_sigma_difference_is_closed_form(self):
        n, t, k, r = 45, 50, 2, 1
        sigma2 = 1.7
        het = mbic_heterogeneous([dummy_fit(sigma2) for _ in range(n)], n, t, k, r)
        semi = mbic_semi(dummy_pooled(sigma2 * n * t, n, t, k, r), n, t, k, r)
        expected = math.log(t) / (n * t) * n - math.log(n * t) / (n * t)
        assert_allclose(het.score - semi.score, expected, rtol=1e-12)

    def test_monotone_in_sigma(self):
        n, t, k, r = 10, 30, 1, 1
        s1 = mbic_heterogeneous([dummy_fit(1.0, t, k, r) for _ in range(n)], n, t, k, r)
        s2 = mbic_heterogeneous([dummy_fit(2.0, t, k, r) for _ in range(n)], n, t, k, r)
        assert s2.score > s1.score

    def test_penalties_vanish(self):
        n, t = 10, 30
        last = None
        for mult in (1, 2, 4, 8, 16):
            score = mbic_heterogeneous(
                [dummy_fit(1.0, t * mult, 1, 1) for _ in range(n * mult)],
                n * mult, t * mult, 1, 1,
            )
            total_penalty = score.penalty1 * score.k1 + score.penalty2 * score.k2
            if last is not None:
                assert total_penalty < last
            last = total_penalty

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(PanelThreshError, match="positive"):
            mbic_heterogeneous([dummy_fit(0.0) for _ in range(3)], 3, 50, 2, 1)

    def test_incomplete_fits_rejected(self):
        fits = [dummy_fit(), None, dummy_fit()]
        with pytest.raises(PanelThreshError, match="all units"):
            mbic_heterogeneous(fits, 3, 50, 2, 1)


def score_of(value):
    return MbicScore(sigma2=1.0, k1=0, k2=0, penalty1=0.0, penalty2=0.0, score=value)


class TestSelect:
    def test_reported_empirical_scores(self):
        result = select_model(score_of(2.049), score_of(2.129))
        assert result.choice is ModelChoice.FULLY_HETEROGENEOUS
        assert_allclose(result.margin, 0.08)

    def test_tie_goes_to_semi(self):
        result = select_model(score_of(1.0), score_of(1.0))
        assert result.choice is ModelChoice.SEMI_HOMOGENEOUS
        assert result.tie

    def test_plain_margin(self):
        result = select_model(score_of(5.0), score_of(4.0))
        assert result.choice is ModelChoice.SEMI_HOMOGENEOUS
        assert_allclose(result.margin, 1.0)
        assert not result.tie

    def test_infinite_scores_rejected(self):
        with pytest.raises(PanelThreshError, match="finite"):
            select_model(score_of(float("nan")), score_of(1.0))
