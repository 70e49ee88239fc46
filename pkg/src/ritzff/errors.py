"""Exception types shared across the package."""


class RitzffError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(RitzffError, ValueError):
    """An input point or vector has the wrong length for the operation."""


class OrderUnsupportedError(RitzffError, ValueError):
    """A second spatial derivative was requested from an activation that has none."""


class NonFiniteValueError(RitzffError, FloatingPointError):
    """A network evaluation produced NaN or infinity."""


class NonFiniteGradientError(RitzffError, FloatingPointError):
    """An optimizer step received a NaN or infinite gradient."""


class NonFiniteLossError(RitzffError, FloatingPointError):
    """Training hit a non-finite loss; carries the last finite state."""

    def __init__(self, message, epoch=None, params=None):
        super().__init__(message)
        self.epoch = epoch
        self.params = params


class MissingSecondDerivativeError(RitzffError, ValueError):
    """The energy density needs u_yy but none was supplied."""


class EmptyBatchError(RitzffError, ValueError):
    """A loss estimate was requested on an empty point batch."""


class EigenFailureError(RitzffError, RuntimeError):
    """The dense eigensolver failed to converge."""


class ComplexSpectrumError(RitzffError, RuntimeError):
    """The product matrix has genuinely complex eigenvalues (hypothesis violation)."""


class InsufficientSpectrumError(RitzffError, ValueError):
    """Too few eigenvalues above the noise floor to fit a decay slope."""


class AllUnclassifiedError(RitzffError, ValueError):
    """Every slope sample fell inside the classification dead zone."""


class SpecValidationError(RitzffError, ValueError):
    """A run specification failed validation; message aggregates all violations."""
