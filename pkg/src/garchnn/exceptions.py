"""Exception hierarchy shared across the package."""


class GarchNNError(Exception):
    """Base class for all package errors."""


class DataError(GarchNNError, ValueError):
    """Input data is malformed, too short or otherwise unusable."""


class InvalidParameterError(GarchNNError, ValueError):
    """Model parameters violate positivity or stationarity constraints."""


class DomainError(GarchNNError, ValueError):
    """A primitive was evaluated outside its mathematical domain."""


class NumericalError(GarchNNError, ArithmeticError):
    """A recursion or optimisation produced a non-finite value."""

    def __init__(self, message, index=None, epoch=None):
        super().__init__(message)
        self.index = index
        self.epoch = epoch


class LeakageError(GarchNNError, RuntimeError):
    """Training would consume observations that belong to the test period."""
