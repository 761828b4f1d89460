"""panel data model, CSV ingestion, projector, regime splitting."""

import io

import numpy as np
import pytest
from numpy.testing import assert_allclose

from panelthresh import (
    PanelDataError,
    PanelDataset,
    PanelSchema,
    PanelThreshError,
    RegimeDirection,
    cross_sectional_average,
    identity_projector,
    load_panel,
    make_projector,
    regime_split,
)

from oracles import column_means_loop, dense_annihilator


def csv_bytes(text: str) -> bytes:
    return "\n".join(line.strip() for line in text.strip().splitlines()).encode()


BASIC_SCHEMA = PanelSchema(
    unit_col="unit", time_col="year", y_col="y", x_cols=["inv"], q_col="inv"
)


def small_panel(n=4, t=12, k=2, seed=0, direction=RegimeDirection.LOW_REGIME_LEQ):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, t, k))
    return PanelDataset(
        y=rng.standard_normal((t, n)),
        x=x,
        q=x[:, :, 0].T,
        unit_labels=[f"u{i}" for i in range(n)],
        time_labels=[str(s) for s in range(t)],
        selection=np.array([True] + [False] * (k - 1)),
        direction=direction,
    )


class TestLoadPanel:
    def test_minimal_wellformed(self):
        raw = csv_bytes(
            """
            unit,year,y,inv
            a,1,1.0,0.1
            a,2,2.0,0.2
            a,3,3.0,0.3
            b,1,1.5,0.4
            b,2,2.5,0.5
            b,3,3.5,0.6
            """
        )
        panel, report = load_panel(raw, BASIC_SCHEMA)
        assert (report.n_units, report.n_periods, report.n_regressors, report.n_threshold) == (2, 3, 1, 1)
        assert panel.unit_labels == ["a", "b"]
        assert_allclose(panel.y[:, 0], [1.0, 2.0, 3.0])
        assert_allclose(panel.q[:, 1], [0.4, 0.5, 0.6])

    def test_unbalanced_names_offender(self):
        raw = csv_bytes(
            """
            unit,year,y,inv
            a,1,1.0,0.1
            a,2,2.0,0.2
            a,3,3.0,0.3
            b,1,1.5,0.4
            b,2,2.5,0.5
            """
        )
        with pytest.raises(PanelDataError, match="unbalanced.*b"):
            load_panel(raw, BASIC_SCHEMA)

    def test_duplicate_pair_rejected(self):
        raw = csv_bytes(
            """
            unit,year,y,inv
            a,1,1.0,0.1
            a,1,2.0,0.2
            """
        )
        with pytest.raises(PanelDataError, match="duplicate"):
            load_panel(raw, BASIC_SCHEMA)

    def test_missing_value_locations(self):
        raw = csv_bytes(
            """
            unit,year,y,inv
            a,1,1.0,0.1
            a,2,,0.2
            b,1,1.0,0.1
            b,2,2.0,0.2
            """
        )
        with pytest.raises(PanelDataError, match="missing"):
            load_panel(raw, BASIC_SCHEMA)

    def test_quantile_transform_bounds(self):
        rng = np.random.default_rng(3)
        rows = ["unit,year,y,open"]
        for u in ("a", "b"):
            for s in range(8):
                rows.append(f"{u},{s},{rng.normal():.6f},{rng.normal() * 40 + 60:.6f}")
        schema = PanelSchema(
            unit_col="unit", time_col="year", y_col="y", x_cols=["open"],
            q_col="open", quantile_q=True,
        )
        panel, _ = load_panel("\n".join(rows).encode(), schema)
        assert panel.q.min() > 0.0 and panel.q.max() <= 100.0
        # largest observation per unit sits at the 100th percentile
        assert_allclose(panel.q.max(axis=0), [100.0, 100.0])

    def test_separate_q_column_and_partial_selection(self):
        raw = csv_bytes(
            """
            unit,year,y,a,b,qq
            u,1,1.0,0.1,1.0,3.0
            u,2,2.0,0.2,2.0,2.0
            u,3,3.0,0.3,3.0,1.0
            v,1,1.0,0.4,1.0,2.0
            v,2,2.0,0.5,2.0,3.0
            v,3,3.0,0.6,3.0,1.0
            """
        )
        schema = PanelSchema(
            unit_col="unit", time_col="year", y_col="y", x_cols=["a", "b"],
            q_col="qq", threshold_cols=["b"],
        )
        panel, report = load_panel(raw, schema)
        assert report.n_threshold == 1
        assert panel.selection.tolist() == [False, True]


class TestCrossSectionalAverage:
    def test_two_unit_mean(self):
        t, k = 5, 1
        x = np.stack([np.zeros((t, k)), np.full((t, k), 2.0)])
        panel = PanelDataset(
            y=np.zeros((t, 2)), x=x, q=np.zeros((t, 2)),
            unit_labels=["a", "b"], time_labels=list("01234"),
            selection=np.array([True]),
        )
        assert_allclose(cross_sectional_average(panel), np.ones((t, k)))

    def test_single_unit_identity(self):
        panel = small_panel(n=1)
        assert_allclose(cross_sectional_average(panel), panel.x[0])

    def test_matches_loop_oracle(self):
        panel = small_panel(n=5, t=8, k=2, seed=11)
        assert_allclose(
            cross_sectional_average(panel), column_means_loop(panel.x), atol=1e-12
        )

    def test_intercept_prepended(self):
        panel = small_panel()
        avg = cross_sectional_average(panel, include_intercept=True)
        assert avg.shape == (panel.n_periods, panel.n_regressors + 1)
        assert_allclose(avg[:, 0], 1.0)

    def test_invariant_to_unit_reordering(self):
        panel = small_panel(n=6, seed=2)
        perm = np.random.default_rng(0).permutation(6)
        shuffled = PanelDataset(
            y=panel.y[:, perm], x=panel.x[perm], q=panel.q[:, perm],
            unit_labels=[panel.unit_labels[i] for i in perm],
            time_labels=panel.time_labels, selection=panel.selection,
        )
        assert_allclose(
            cross_sectional_average(panel), cross_sectional_average(shuffled), atol=1e-14
        )


class TestProjector:
    def test_demeaning(self):
        proj = make_projector(np.ones((7, 1)))
        v = np.arange(7.0)
        assert_allclose(proj.apply(v), v - v.mean(), atol=1e-12)

    def test_annihilates_own_basis(self):
        rng = np.random.default_rng(5)
        basis = rng.standard_normal((9, 3))
        proj = make_projector(basis)
        assert np.linalg.norm(proj.apply(basis)) <= 1e-8 * np.linalg.norm(basis)

    def test_idempotent_and_symmetric(self):
        rng = np.random.default_rng(8)
        basis = rng.standard_normal((6, 2))
        proj = make_projector(basis)
        m = proj.matrix()
        assert_allclose(m @ m, m, atol=1e-10)
        assert_allclose(m, m.T, atol=1e-10)
        assert_allclose(m, dense_annihilator(basis), atol=1e-10)

    def test_rank_deficient_basis(self):
        rng = np.random.default_rng(1)
        col = rng.standard_normal((10, 1))
        basis = np.hstack([col, 2.0 * col])
        proj = make_projector(basis)
        assert np.linalg.norm(proj.apply(basis)) <= 1e-8 * np.linalg.norm(basis)
        m = proj.matrix()
        assert_allclose(m @ m, m, atol=1e-10)

    def test_too_many_columns(self):
        with pytest.raises(PanelThreshError, match="annihilate everything"):
            make_projector(np.ones((3, 3)))

    def test_contraction(self):
        rng = np.random.default_rng(13)
        proj = make_projector(rng.standard_normal((20, 4)))
        for _ in range(25):
            v = rng.standard_normal(20)
            assert np.linalg.norm(proj.apply(v)) <= np.linalg.norm(v) + 1e-12

    def test_identity_projector(self):
        proj = identity_projector(5)
        v = np.arange(5.0)
        assert_allclose(proj.apply(v), v)


class TestRegimeSplit:
    def test_empty_regime(self):
        x = np.arange(8.0).reshape(4, 2)
        q = np.array([1.0, 2.0, 3.0, 4.0])
        regs = regime_split(x, q, 0.5, np.array([True, False]))
        assert_allclose(regs.w_low, np.zeros((4, 1)))

    def test_saturated_regime(self):
        x = np.arange(8.0).reshape(4, 2)
        q = np.array([1.0, 2.0, 3.0, 4.0])
        regs = regime_split(x, q, 4.0, np.array([True, True]))
        assert_allclose(regs.w_low, x)
        assert_allclose(regs.z, np.hstack([x, x]))

    def test_indicator_values(self):
        x = np.ones((4, 1))
        q = np.array([1.0, 2.0, 3.0, 4.0])
        regs = regime_split(x, q, 2.5, np.array([True]))
        assert_allclose(regs.w_low[:, 0], [1.0, 1.0, 0.0, 0.0])

    def test_tie_is_inclusive(self):
        x = np.ones((3, 1))
        q = np.array([1.0, 2.0, 3.0])
        regs = regime_split(x, q, 2.0, np.array([True]))
        assert_allclose(regs.w_low[:, 0], [1.0, 1.0, 0.0])
        regs_geq = regime_split(x, q, 2.0, np.array([True]), RegimeDirection.HIGH_REGIME_GEQ)
        assert_allclose(regs_geq.w_low[:, 0], [0.0, 1.0, 1.0])

    def test_monotone_nesting(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((30, 2))
        q = rng.standard_normal(30)
        sel = np.array([True, True])
        for _ in range(20):
            g1, g2 = np.sort(rng.standard_normal(2))
            w1 = regime_split(x, q, g1, sel).w_low
            w2 = regime_split(x, q, g2, sel).w_low
            active1 = np.abs(w1).sum(axis=1) > 0
            active2 = np.abs(w2).sum(axis=1) > 0
            assert not np.any(active1 & ~active2)

    def test_direction_symmetry_on_tie_free_data(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((25, 2))
        q = rng.standard_normal(25)
        gamma = 0.3
        sel = np.array([True, False])
        geq = regime_split(x, q, gamma, sel, RegimeDirection.HIGH_REGIME_GEQ)
        leq_neg = regime_split(x, -q, -gamma, sel, RegimeDirection.LOW_REGIME_LEQ)
        assert_allclose(geq.w_low, leq_neg.w_low)


class TestPanelValidation:
    def test_selection_must_be_nonempty(self):
        with pytest.raises(PanelDataError, match="selection"):
            PanelDataset(
                y=np.zeros((3, 1)), x=np.zeros((1, 3, 1)), q=np.zeros((3, 1)),
                unit_labels=["a"], time_labels=list("abc"),
                selection=np.array([False]),
            )

    def test_nonfinite_rejected(self):
        y = np.zeros((3, 1))
        y[0, 0] = np.nan
        with pytest.raises(PanelDataError, match="non-finite"):
            PanelDataset(
                y=y, x=np.zeros((1, 3, 1)), q=np.zeros((3, 1)),
                unit_labels=["a"], time_labels=list("abc"),
                selection=np.array([True]),
            )

    def test_constant_col_rank_count(self):
        x = np.zeros((1, 4, 2))
        x[:, :, 0] = 1.0
        panel = PanelDataset(
            y=np.zeros((4, 1)), x=x, q=np.zeros((4, 1)),
            unit_labels=["a"], time_labels=list("abcd"),
            selection=np.array([False, True]), constant_col=0,
        )
        assert panel.n_rank_regressors == 1
