"""Likelihood-ratio statistic, critical values, confidence sets."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from panelthresh import (
    PanelThreshError,
    build_grid,
    estimate_eta2,
    identity_projector,
    lr_cdf,
    lr_confidence_set,
    lr_critical_value,
    lr_statistic,
)
from panelthresh.threshold import GammaGrid, GridSource, unit_rss_profile

SEL1 = np.array([True])


def grid_of(values):
    return GammaGrid(
        values=np.asarray(values, dtype=float), trim_lo=0.0, trim_hi=0.0,
        source=GridSource.PER_UNIT,
    )


class TestCriticalValues:
    def test_tabulated_constants(self):
        assert abs(lr_critical_value(0.10) - 5.94) <= 0.01
        assert abs(lr_critical_value(0.05) - 7.35) <= 0.01
        assert abs(lr_critical_value(0.01) - 10.59) <= 0.01

    def test_cdf_roundtrip(self):
        for a in (0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5):
            assert abs(lr_cdf(lr_critical_value(a)) - (1.0 - a)) <= 1e-12

    def test_domain(self):
        for bad in (-0.1, 0.0, 1.0, 1.5):
            with pytest.raises(PanelThreshError):
                lr_critical_value(bad)

    def test_cdf_shape(self):
        assert lr_cdf(0.0) == 0.0
        assert lr_cdf(-5.0) == 0.0
        assert 0.0 < lr_cdf(1.0) < lr_cdf(10.0) < 1.0


class TestStatistic:
    def test_zero_at_minimiser(self):
        assert lr_statistic(4.2, 4.2, 1.3) == 0.0

    def test_arithmetic(self):
        assert lr_statistic(2.0, 1.0, 0.5) == 2.0

    def test_negative_numerator_beyond_slack(self):
        with pytest.raises(PanelThreshError, match="below the minimised"):
            lr_statistic(1.0, 2.0, 0.5)

    def test_tiny_negative_clipped(self):
        assert lr_statistic(1.0 - 1e-12, 1.0, 0.5) == 0.0

    def test_sigma_must_be_positive(self):
        with pytest.raises(PanelThreshError, match="positive"):
            lr_statistic(2.0, 1.0, 0.0)


class TestConfidenceSet:
    def rss_bowl(self, n=21):
        vals = np.linspace(-1, 1, n)
        rss = 10.0 + 50.0 * (vals - 0.1) ** 2
        return grid_of(vals), rss

    def test_contains_gamma_hat(self):
        grid, rss = self.rss_bowl()
        prof = lr_confidence_set(grid, rss, sigma2_eps=0.5, level=0.05)
        assert prof.covers(prof.gamma_hat)
        assert prof.lr_values[np.argmin(rss)] == 0.0

    def test_shrinks_toward_gamma_hat(self):
        grid, rss = self.rss_bowl()
        wide = lr_confidence_set(grid, rss, 0.5, level=0.05)
        narrow = lr_confidence_set(grid, rss, 0.5, level=0.9999)
        n_wide = int(wide.accepted.sum())
        n_narrow = int(narrow.accepted.sum())
        assert n_narrow <= n_wide
        assert n_narrow >= 1
        assert narrow.covers(narrow.gamma_hat)

    def test_monotone_nesting(self):
        grid, rss = self.rss_bowl()
        prof_10 = lr_confidence_set(grid, rss, 0.5, level=0.10)
        prof_05 = lr_confidence_set(grid, rss, 0.5, level=0.05)
        acc_10 = prof_10.accepted
        acc_05 = prof_05.accepted
        assert not np.any(acc_10 & ~acc_05)  # set(0.10) subset of set(0.05)

    def test_flat_zero_profile_accepts_entire_grid(self):
        grid = grid_of(np.linspace(0, 1, 11))
        rss = np.zeros(11)
        prof = lr_confidence_set(grid, rss, sigma2_eps=0.0, level=0.05)
        assert prof.accepted.all()
        assert prof.confidence_set == [(0.0, 1.0)]

    def test_disconnected_runs_reported(self):
        vals = np.arange(7, dtype=float)
        rss = np.array([0.0, 100.0, 0.0, 0.0, 100.0, 0.0, 100.0])
        prof = lr_confidence_set(grid_of(vals), rss, sigma2_eps=1.0, level=0.05)
        assert prof.confidence_set == [(0.0, 0.0), (2.0, 3.0), (5.0, 5.0)]
        assert prof.covers(2.5) and not prof.covers(4.0)

    def test_skipped_points_stay_out(self):
        vals = np.arange(5, dtype=float)
        rss = np.array([0.0, np.nan, 0.0, 0.0, 0.0])
        prof = lr_confidence_set(grid_of(vals), rss, sigma2_eps=1.0, level=0.05)
        assert prof.confidence_set == [(0.0, 0.0), (2.0, 4.0)]

    def test_scale_invariance(self):
        grid, rss = self.rss_bowl()
        c = 4.0
        p1 = lr_confidence_set(grid, rss, 0.5, level=0.05)
        p2 = lr_confidence_set(grid, c * c * rss, c * c * 0.5, level=0.05)
        assert_allclose(p2.lr_values, p1.lr_values, rtol=1e-12)
        assert p1.confidence_set == p2.confidence_set

    def test_eta2_widening(self):
        grid, rss = self.rss_bowl()
        base = lr_confidence_set(grid, rss, 0.5, level=0.05, eta2=1.0)
        wide = lr_confidence_set(grid, rss, 0.5, level=0.05, eta2=4.0)
        assert wide.accepted.sum() >= base.accepted.sum()


class TestSimulatedProfiles:
    def test_strong_threshold_rejects_off_step_gammas(self):
        rng = np.random.default_rng(17)
        t = 100
        x = rng.standard_normal((t, 1))
        q = x[:, 0].copy()
        gamma0 = 0.5
        y = x[:, 0] + 3.0 * x[:, 0] * (q <= gamma0)  # noiseless, huge step
        grid = build_grid(q, trim=0.1)
        prof = unit_rss_profile(x, y, q, identity_projector(t), grid.values, SEL1)
        best = prof.argmin()
        sigma2 = max(prof.rss[best] / t, 1e-12)
        crit = lr_critical_value(0.01)
        lr_vals = (prof.rss - prof.rss[best]) / sigma2
        off_step = np.abs(grid.values - gamma0) > 0.25
        finite = np.isfinite(lr_vals)
        assert np.all(lr_vals[off_step & finite] > crit)

    def test_eta2_plugin_near_one_homoskedastic(self):
        rng = np.random.default_rng(99)
        t = 4000
        w = rng.standard_normal((t, 1)) + 2.0
        q = rng.standard_normal(t)
        resid = rng.standard_normal(t)
        val = estimate_eta2(
            w, q, resid, delta_hat=np.array([1.0]), gamma_hat=0.0, sigma2_eps=1.0
        )
        assert 0.7 < val < 1.3
