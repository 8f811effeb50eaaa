"""Exception types shared across the package."""


class PanelDataError(ValueError):
    """Raised when input data violate the panel schema or its invariants."""


class ConfigError(ValueError):
    """Raised for invalid configuration (fold counts, grids, CLI options)."""


class EstimationError(RuntimeError):
    """Raised when an estimator cannot produce a value (empty cells, degenerate fits)."""
