"""Exception hierarchy shared by the package."""


class OscLabError(Exception):
    """Base class for all errors raised by osclab."""


class DomainError(OscLabError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class SingularParametrization(OscLabError):
    """A boundary parametrization has vanishing Jacobian."""


class ClosedFormUnavailable(OscLabError):
    """No closed-form expression exists for the requested coefficient."""


class EstimationError(OscLabError):
    """A weak-limit extrapolation did not settle within tolerance.

    The ``table`` attribute carries the per-test residuals.
    """

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


class ResolutionError(OscLabError, ValueError):
    """Requested mesh size does not resolve the boundary oscillation."""


class GeometryError(OscLabError):
    """A chart pullback or geometric construction failed."""


class AssemblyError(OscLabError):
    """Finite element assembly hit a degenerate element."""


class ConsistencyError(OscLabError, ValueError):
    """Objects that must describe the same configuration disagree."""


class SolverError(OscLabError):
    """An iterative solver did not converge.

    ``history`` holds the residual norms recorded before giving up.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class EigenSolverError(OscLabError):
    """The eigensolver broke down or failed its residual check."""


class ConfigError(OscLabError, ValueError):
    """Malformed or invalid configuration document."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
