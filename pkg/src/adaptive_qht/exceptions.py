"""Exception types raised by the library."""


class TomographyError(Exception):
    """Base class for library errors."""


class TruncationError(TomographyError, ValueError):
    """The Fock truncation is too small for the requested quantity."""


class GridError(TomographyError, RuntimeError):
    """A sampling table could not cover the quadrature distribution."""


class IllConditionedError(TomographyError, ArithmeticError):
    """A linear system was singular or too badly conditioned to accept."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(TomographyError, RuntimeError):
    """A numerical integral did not converge to the requested accuracy."""
