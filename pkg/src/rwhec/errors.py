"""Exception types raised across the package."""


class RwhecError(Exception):
    """Base class for all calibration errors."""


class NotSkewError(RwhecError, ValueError):
    pass


class NearPiAngleError(RwhecError, ValueError):
    """Raised when a rotation logarithm is requested too close to angle pi."""


class RankDeficientError(RwhecError, ValueError):
    pass


class IndexOutOfRangeError(RwhecError, IndexError):
    pass


class EmptyEdgeError(RwhecError, ValueError):
    pass


class DimensionMismatchError(RwhecError, ValueError):
    pass


class ScaleNearZeroError(RwhecError, ArithmeticError):
    """The recovered monocular scale is too close to zero to divide by."""


class SolverFailure(RwhecError, RuntimeError):
    """The conic solver stopped without reaching the requested accuracy.

    Attributes:
        residuals: Final primal/dual residuals reported by the backend.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


class KernelAmbiguousError(RwhecError, RuntimeError):
    pass


class DivergedError(RwhecError, RuntimeError):
    pass


class VariableMismatchError(RwhecError, ValueError):
    pass


class ParseError(RwhecError, ValueError):
    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.field = field


class ValidationError(RwhecError, ValueError):
    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = list(offending or [])
