"""Exception and warning types shared across the package."""


class GraphFormatError(ValueError):
    """Raised for malformed or inconsistent graph files and graph data."""


class NumericError(RuntimeError):
    """Raised when a numerical routine fails (non-convergence, bad residual)."""


class DegeneracyWarning(UserWarning):
    """Emitted when zero-norm feature rows force a degenerate cosine value."""
