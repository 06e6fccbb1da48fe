"""Exception types raised by the solver."""

from __future__ import annotations


class NonlocalIsaacsError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NonlocalIsaacsError, ValueError):
    """Inconsistent or out-of-range parameters."""


class CFLViolation(ConfigurationError):
    """An explicit component would produce negative scheme coefficients."""

    def __init__(self, message: str, worst_ratio: float, suggested_dt: float):
        super().__init__(message)
        self.worst_ratio = worst_ratio
        self.suggested_dt = suggested_dt


class IntegrationError(NonlocalIsaacsError, ArithmeticError):
    """Shell quadrature did not reach its tolerance.

    Attributes:
        partial_sum: the integral accumulated before giving up.
    """

    def __init__(self, message: str, partial_sum=None):
        super().__init__(message)
        self.partial_sum = partial_sum


class DomainError(NonlocalIsaacsError, ValueError):
    """A point could not be resolved on the grid or by the extension policy."""


class MonotonicityError(NonlocalIsaacsError):
    """A construction would produce a non-monotone stencil."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class SolverError(NonlocalIsaacsError, RuntimeError):
    """The implicit stage failed to converge.

    Attributes:
        history: max-node change per iteration.
        time_index: index of the failing step, when known.
    """

    def __init__(self, message: str, history=None, time_index=None):
        super().__init__(message)
        self.history = list(history or [])
        self.time_index = time_index
