"""Threshold regression for heterogeneous panels with unobserved common factors.

Estimation projects each unit's data on the orthogonal complement of
cross-sectional regressor averages, then grid-searches the threshold by
least squares.  The package covers per-unit and common-threshold models,
likelihood-ratio confidence sets for the threshold, sup-Wald linearity
tests with wild-bootstrap p-values, an information criterion for model
choice, and a seeded synthetic-panel generator for Monte Carlo validation.
"""

from .cce import UnitFit, cce_fit_given_gamma, default_bandwidth, variance_hac, variance_hc
from .dgp import DgpConfig, DgpTruth, regime_counts, simulate
from .errors import GridError, IdentificationError, PanelDataError, PanelThreshError
from .linearity import (
    NullLinearFit,
    TestReport,
    TestScope,
    fit_linear_null,
    linearity_test_pooled,
    linearity_test_unit,
    pooled_delta,
    sup_wald_pooled,
    sup_wald_unit,
    wild_bootstrap_pvalue,
)
from .lr import (
    LrProfile,
    estimate_eta2,
    lr_cdf,
    lr_confidence_set,
    lr_critical_value,
    lr_statistic,
)
from .panel import (
    IngestReport,
    PanelDataset,
    PanelSchema,
    Projector,
    RegimeDirection,
    RegimeMatrices,
    cross_sectional_average,
    identity_projector,
    load_panel,
    make_projector,
    regime_split,
)
from .selection import (
    MbicScore,
    ModelChoice,
    SelectionResult,
    mbic_heterogeneous,
    mbic_semi,
    select_model,
)
from .threshold import (
    GammaGrid,
    GridSource,
    HeterogeneousFit,
    PooledFit,
    RssProfile,
    build_grid,
    build_pooled_grid,
    fit_all_units,
    fit_pooled_threshold,
    fit_unit_threshold,
    pooled_rss_profile,
    unit_rss_profile,
)

__version__ = "0.1.0"
