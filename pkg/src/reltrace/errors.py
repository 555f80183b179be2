"""Exception hierarchy shared by all numerical modules."""


class RelTraceError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RelTraceError, ValueError):
    """Invalid parameter range, malformed config, or unknown key."""


class ConfigError(ValidationError):
    pass


class DomainError(ValidationError):
    """A point or argument lies outside the operation's domain."""


class UnsupportedDomainError(ValidationError):
    """The domain kind lacks the geometry needed by the operation."""


class GeometryError(ValidationError):
    pass


class CacheVersionError(ValidationError):
    pass


class NumericalError(RelTraceError, ArithmeticError):
    """Base class for convergence failures (CLI exit status 3)."""


class QuadratureError(NumericalError):
    """Quadrature missed its target tolerance.

    Attributes:
        estimate: best value obtained before giving up.
        error: achieved error estimate.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ExcessiveRejectionError(NumericalError):
    pass


class TableRangeError(NumericalError):
    pass


class TailFitError(NumericalError):
    pass


class TailTooHeavyError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GridTooCoarseError(ValidationError):
    pass
