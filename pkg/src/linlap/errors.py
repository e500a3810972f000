"""Exception types shared across the package."""


class LinlapError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(LinlapError):
    """Array shapes are incompatible with the requested operation."""


class NumericError(LinlapError):
    """Inputs contain non-finite values or a computation became invalid."""


class NotPositiveDefiniteError(LinlapError):
    """Cholesky failed even after the single jitter retry."""


class CapacityError(LinlapError):
    """A dense object would exceed the configured materialization guard."""


class RankError(LinlapError):
    """Requested subspace dimension exceeds the usable numerical rank."""

    def __init__(self, message, max_usable=None):
        super().__init__(message)
        self.max_usable = max_usable


class ParseError(LinlapError):
    """A data file could not be parsed; message carries row/column."""


class TrainingDivergedError(LinlapError):
    """Training produced a non-finite loss; message carries the epoch."""


class UnsupportedTaskError(LinlapError):
    """Operation is not defined for the dataset's task type."""


class UndefinedMetricError(LinlapError):
    """Metric has no defined value for the given inputs."""
