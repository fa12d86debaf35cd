"""Exception hierarchy.

Validation problems subclass :class:`ValueError`; numerical failures derive
from :class:`NumericalError` so callers (the CLI in particular) can map them
to distinct exit codes.
"""


class RMSwitchError(Exception):
    """Base class for all package errors."""


class ValidationError(RMSwitchError, ValueError):
    """An input violates a documented domain constraint."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(RMSwitchError, ArithmeticError):
    """Base class for numerical failures."""


class DegenerateBifurcation(NumericalError):
    """The drift cubic has a (near) repeated root."""


class BisectionBracketFailure(NumericalError):
    """A bisection was asked to work on an interval without a sign change."""


class NonFiniteState(NumericalError):
    """The integrator produced NaN or infinity."""

    def __init__(self, message, path_index=None):
        self.path_index = path_index
        if path_index is not None:
            message = f"path {path_index}: {message}"
        super().__init__(message)


class DomainError(NumericalError):
    """A Lyapunov function was evaluated outside its domain."""


class WrongSide(ValidationError):
    """Initial condition lies on the wrong side of a hitting threshold."""

    def __init__(self, message):
        super().__init__("x0", message)
