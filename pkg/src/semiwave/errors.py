"""Exception types shared across the package."""


class SemiwaveError(Exception):
    """Base class for all computational failures raised by this package."""


class ExprSyntaxError(SemiwaveError):
    """Malformed expression text; carries the 0-based offset of the failure."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnboundVariable(SemiwaveError):
    pass


class NonFiniteValue(SemiwaveError):
    """An expression evaluated to inf/nan, typically a pole hit."""


class PoleDetected(SemiwaveError):
    """Model coefficient screening found a non-finite value inside the strip."""


class SchemaError(SemiwaveError):
    """Model file does not conform to the expected JSON layout."""


class SingularLeadingMatrix(SemiwaveError):
    """Leading coefficient block not invertible at the requested point."""


class NonRealMode(SemiwaveError):
    """An eigenvalue of the companion matrix has an imaginary part above tolerance."""


class AmbiguousLabeling(SemiwaveError):
    """Optimal and runner-up label assignments are numerically indistinguishable."""


class MatchingAmbiguity(AmbiguousLabeling):
    """Same condition, raised during continuation along a complex path."""


class TangentialCrossing(SemiwaveError):
    """A real crossing with vanishing slope; genericity fails."""


class LeftStrip(SemiwaveError):
    """An iteration left the declared analyticity strip."""


class NoConvergence(SemiwaveError):
    pass


class CollapsedToRealAxis(SemiwaveError):
    """A branch-point search converged onto the real axis."""


class GapTooSmall(SemiwaveError):
    """Spectral gap below tolerance; projectors would be unreliable."""


class RouteDiscrepancy(SemiwaveError):
    """Two independent computations of the same quantity disagree."""


class ParallelismResidual(SemiwaveError):
    """A transported eigenvector failed to align with its monodromy target."""


class TailBoundExceeded(SemiwaveError):
    """A truncation-tail certificate is too large for the requested accuracy."""


class QuadratureError(SemiwaveError):
    """A quadrature failed to converge under node doubling."""


class MinimizerAtBoundary(SemiwaveError):
    """The decay exponent attains its minimum on the window boundary."""


class ValidationFailure(SemiwaveError):
    """A downstream computation was requested on a model that failed validation."""
