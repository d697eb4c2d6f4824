"""Exception and warning types raised across the package."""


class VenationError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(VenationError, ValueError):
    pass


class DimensionError(VenationError, ValueError):
    pass


class SingularRHSError(VenationError, ArithmeticError):
    pass


class ConservationError(VenationError, ValueError):
    """Sources and sinks do not balance (sum of S is not zero)."""


class SingularSystemError(VenationError, ArithmeticError):
    """Weighted Laplacian is singular on the positive-weight subgraph."""


class StiffFailureError(VenationError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NumericalBlowupError(VenationError, FloatingPointError):
    pass


class DegenerateOperatorError(VenationError, ValueError):
    pass


class ConvergenceError(VenationError, RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class StepRejected(VenationError):
    """Raised by a time step that would violate its stability bound."""

    def __init__(self, message, suggested_h=None):
        super().__init__(message)
        self.suggested_h = suggested_h


class NotApplicableError(VenationError, ValueError):
    pass


class ConfigError(VenationError, ValueError):
    pass


class WellPosednessWarning(UserWarning):
    """Parameters lie outside the range covered by the existence theory."""
