"""Exception types shared across the package."""


class PoseRefineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(PoseRefineError):
    """A parameter or configuration field is invalid or inconsistent."""


class ShapeError(PoseRefineError):
    """Array arguments have incompatible shapes."""


class DataError(PoseRefineError):
    """Input data violates a contract (non-finite values, out-of-range coords)."""


class FittingError(PoseRefineError):
    """Not enough (or unusable) data to fit a model."""


class NumericalError(PoseRefineError):
    """A numerical routine failed (non-PD matrix, diverging loss, ...)."""


class AlignmentError(PoseRefineError):
    """Procrustes alignment is undefined for a degenerate point set."""


class DatasetParseError(PoseRefineError):
    """A dataset file could not be parsed; message carries the line number."""


class SchemaError(PoseRefineError):
    """A dataset record is missing or mistypes a required field."""


class ProjectionError(PoseRefineError):
    """A joint cannot be projected (behind or too close to the camera)."""
