"""Exception types shared across the package."""


class FinslerKitError(Exception):
    """Base class for all errors raised by finslerkit."""


class ExpressionError(FinslerKitError):
    """Syntax or semantic error in a metric expression.

    Carries the 1-based source position of the offending token.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class EvaluationDomainError(FinslerKitError):
    """A forbidden numeric operation during evaluation.

    Division by zero, even root of a negative, log of a non-positive,
    non-integer power of a negative base, or a non-finite result.
    """


class StencilError(FinslerKitError):
    """A finite-difference stencil cannot be placed at the requested point."""


class SingularMetricError(FinslerKitError):
    """The fundamental tensor is degenerate (or not positive definite
    where the declared class requires it)."""


class DirectionDependenceError(FinslerKitError):
    """Berwald coefficients vary across probe directions beyond tolerance,
    so no position-only connection can be extracted."""


class ChartBoxError(FinslerKitError):
    """A trajectory left the declared chart box; results past the exit
    would be extrapolation, which is not allowed."""


class IntegrationError(FinslerKitError):
    """ODE integration failed (velocity collapse, non-finite state)."""


class DegeneratePointsError(FinslerKitError):
    """Ellipsoid fitting received points that do not span the space."""


class ConvergenceError(FinslerKitError):
    """An iterative solver hit its iteration cap before its tolerance."""


class ConfigError(FinslerKitError):
    """Malformed or inconsistent run configuration."""
