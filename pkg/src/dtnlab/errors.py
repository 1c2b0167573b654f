"""Exception hierarchy for the laboratory."""


class LabError(Exception):
    """Base class for all errors raised by dtnlab."""


class InvalidResolutionError(LabError):
    """Mesh resolution parameter out of range."""


class DegenerateMeshError(LabError):
    """A tetrahedron with non-positive volume was produced or supplied."""


class AmbiguousProjectionError(LabError):
    """Nearest-boundary-point projection is not unique at the given point."""


class ConeViolationError(LabError):
    """Requested cone offset violates the probe's cone geometry."""


class PolePlacementError(LabError):
    """Pole point is not strictly exterior to the closed domain."""


class SolverFailureError(LabError):
    """Sparse factorization or linear solve failed."""


class ResonanceError(SolverFailureError):
    """Schroedinger system is singular or numerically near-singular."""

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class SpectralFailureError(LabError):
    """Eigenvalue solver failed to converge."""


class ShapeMismatchError(LabError):
    """Operator/vector dimensions are inconsistent."""


class RangeError(LabError):
    """Scalar parameter outside its admissible interval."""


class UnresolvableScaleError(LabError):
    """Requested localization scale is below the mesh resolution guard."""


class DegenerateDatumError(LabError):
    """Boundary datum produced a vanishing normalizer."""


class EllipticityError(LabError):
    """Matrix coefficient fails positive definiteness where required."""


class NonConvergenceError(LabError):
    """Iterative refinement loop exceeded its cap without reaching target."""


class GeometryError(LabError):
    """Geometric precondition (enclosure, membership) violated."""


class UsageError(LabError):
    """Invalid arguments at the experiment/config level."""
