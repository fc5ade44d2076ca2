"""Exception hierarchy shared by all tmlab modules."""


class TMLabError(Exception):
    """Base class for every error raised by tmlab."""


class MeshError(TMLabError, ValueError):
    """Invalid triangulation or mesh input."""


class OFFParseError(MeshError):
    """Malformed OFF text."""


class NonTriangularFaceError(MeshError):
    """An OFF face with a vertex count other than three."""


class NonManifoldError(MeshError):
    """An edge shared by more than two faces, or a pinched vertex star."""


class OpenSurfaceError(MeshError):
    """A boundary edge: the surface is not closed."""


class OrientationError(MeshError):
    """Two faces traverse a shared edge in the same direction."""


class TriangleInequalityError(MeshError):
    """A face whose edge lengths violate the strict triangle inequality."""

    def __init__(self, message, face=None):
        super().__init__(message)
        self.face = face


class DegenerateTriangleError(MeshError):
    """A face with (numerically) vanishing area."""

    def __init__(self, message, face=None):
        super().__init__(message)
        self.face = face


class ResourceGuardError(TMLabError, ValueError):
    """A requested size exceeds a hard resource limit."""


class DimensionError(TMLabError, ValueError):
    """A vector does not match the number of mesh vertices."""


class TildeUndefined(TMLabError, ValueError):
    """The curvature-weighted mean needs a nonzero Euler characteristic."""


class ChiError(TMLabError, ValueError):
    """An operation required chi == 0 (or chi != 0) and got the other."""


class ConstraintViolation(TMLabError, ValueError):
    """A field that should lie in the curvature-orthogonal space does not."""


class NegativeRadicand(TMLabError, ValueError):
    """u.Lu - alpha u.Mu < 0: alpha is at or above lambda_g, or u is infeasible."""


class AlphaTooLarge(TMLabError, ValueError):
    """alpha >= lambda_g."""


class ConvergenceError(TMLabError, RuntimeError):
    """An iterative method hit its iteration cap."""


class SingularSystemError(TMLabError, RuntimeError):
    """A linear system could not be factorized (e.g. alpha at an eigenvalue)."""


class OverflowGuard(TMLabError, FloatingPointError):
    """beta * max(u^2) exceeded the exponent guard; reported as 'diverged'."""

    def __init__(self, message, magnitude=None):
        super().__init__(message)
        self.magnitude = magnitude


class MonotonicityError(TMLabError, RuntimeError):
    """Supremum sweep values decreased beyond solver noise."""


class ResolutionError(TMLabError, ValueError):
    """A construction's zones are too small for the mesh to resolve."""


class FitError(TMLabError, ValueError):
    """Too few samples in a fitting window."""


class DegenerateFieldError(TMLabError, ValueError):
    """An operation received a zero field where a nonzero one is required."""


class PreconditionError(TMLabError, ValueError):
    """An input does not meet an operation's stated precondition."""
