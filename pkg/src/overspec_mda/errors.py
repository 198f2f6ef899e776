"""Exception hierarchy.

Every error raised on purpose by this package derives from ``OverspecError``
so the CLI can map it to an exit code.
"""


class OverspecError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(OverspecError, ValueError):
    """Malformed input: wrong shape, out-of-range weight, bad order."""


class PreconditionError(OverspecError, ValueError):
    """A theory precondition (usually an initialization radius) is violated."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class NumericalDomainError(OverspecError, ArithmeticError):
    """A quantity left its numerical domain (non-finite value, sigma^2 <= 0)."""


class DegenerateVarianceError(NumericalDomainError):
    """The EM variance denominator collapsed to (near) zero."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
