"""Exception taxonomy shared across the package."""


class ShareSSMError(Exception):
    """Base class for all library errors."""


class DimensionError(ShareSSMError):
    """Structural mismatch: incompatible shapes, lengths, or state sizes."""


class ParameterError(ShareSSMError):
    """Invalid configuration or argument value."""


class PreconditionError(ParameterError):
    """An analytic precondition (e.g. a stability bound) is violated."""


class DataError(ShareSSMError):
    """Malformed or inconsistent input data."""


class TrainingError(ShareSSMError):
    """Optimization failure (divergence, non-finite gradients)."""
