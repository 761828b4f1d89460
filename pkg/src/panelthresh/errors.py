"""Exception types shared across the package."""


class PanelThreshError(Exception):
    """Base class for all errors raised by panelthresh."""


class PanelDataError(PanelThreshError):
    """Malformed input data: unbalanced panel, missing values, duplicates."""


class GridError(PanelThreshError):
    """Threshold grid construction failed (empty grid, disjoint supports)."""


class IdentificationError(PanelThreshError):
    """A regression is not identified (empty regime, singular design)."""
