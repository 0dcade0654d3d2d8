"""
Error hierarchy for mapoly
"""

from typing import Any, Dict, Optional


class MapolyError(Exception):
    """Base error carrying a machine-readable code and context"""

    code = "MAPOLY_ERROR"

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "context": self.context}


class GeometryError(MapolyError):
    code = "GEOMETRY_ERROR"


class NormalizeError(MapolyError):
    code = "NORMALIZE_ERROR"


class SpectralError(MapolyError):
    code = "SPECTRAL_ERROR"


class SolverError(MapolyError):
    code = "SOLVER_ERROR"


class AsymptoticsError(MapolyError):
    code = "ASYMPTOTICS_ERROR"


class ConstructionError(MapolyError):
    code = "CONSTRUCTION_ERROR"


class HarnessError(MapolyError):
    code = "HARNESS_ERROR"


# geometry
class UnboundedInput(GeometryError):
    """Half-space input does not describe a bounded set"""

    code = "UNBOUNDED_INPUT"


class DegenerateInput(GeometryError):
    """Input is not full-dimensional"""

    code = "DEGENERATE_INPUT"


class InconsistentInput(GeometryError):
    """Representations or face lattice disagree"""

    code = "INCONSISTENT_INPUT"


class PointNotOnBoundary(GeometryError):
    code = "POINT_NOT_ON_BOUNDARY"


# normalize
class NotPositiveDefinite(NormalizeError):
    code = "NOT_POSITIVE_DEFINITE"


class DegenerateCone(NormalizeError):
    """Cone has fewer than two facets"""

    code = "DEGENERATE_CONE"


class NotOnSkeleton(NormalizeError):
    code = "NOT_ON_SKELETON"


class MuOutOfRange(NormalizeError):
    code = "MU_OUT_OF_RANGE"


class EmptySample(NormalizeError):
    code = "EMPTY_SAMPLE"


# spectral
class OpeningOutOfRange(SpectralError):
    code = "OPENING_OUT_OF_RANGE"


class MeshFailure(SpectralError):
    code = "MESH_FAILURE"


class NonConvergedEigenSolve(SpectralError):
    code = "NON_CONVERGED_EIGEN_SOLVE"


# solver
class NewtonDiverged(SolverError):
    """Newton and the pseudo-time fallback both failed"""

    code = "NEWTON_DIVERGED"


class NonConvexData(SolverError):
    """Boundary data admits no convex extension; recorded as a warning"""

    code = "NON_CONVEX_DATA"


class PinInfeasible(SolverError):
    code = "PIN_INFEASIBLE"


class OutOfDomain(SolverError):
    code = "OUT_OF_DOMAIN"


class ExpressionError(SolverError):
    code = "EXPRESSION_ERROR"


# asymptotics
class WindowTooSmall(AsymptoticsError):
    code = "WINDOW_TOO_SMALL"


class NoRealRoot(AsymptoticsError):
    code = "NO_REAL_ROOT"


class DegenerateQuadratic(AsymptoticsError):
    code = "DEGENERATE_QUADRATIC"


class FitIllConditioned(AsymptoticsError):
    code = "FIT_ILL_CONDITIONED"


class HypothesisViolated(AsymptoticsError):
    code = "HYPOTHESIS_VIOLATED"


# construction
class ACheckFailed(ConstructionError):
    code = "A_CHECK_FAILED"


class C0TooSmall(ConstructionError):
    code = "C0_TOO_SMALL"


class BoundaryDominationFailed(ConstructionError):
    code = "BOUNDARY_DOMINATION_FAILED"


class DeterminantDominationFailed(ConstructionError):
    code = "DETERMINANT_DOMINATION_FAILED"


class ContinuityViolation(ConstructionError):
    code = "CONTINUITY_VIOLATION"


class NotUniformlyConvex(ConstructionError):
    code = "NOT_UNIFORMLY_CONVEX"


# harness
class SeriesMissing(HarnessError):
    code = "SERIES_MISSING"


class IncompleteJets(HarnessError):
    code = "INCOMPLETE_JETS"


class ConfigError(HarnessError):
    code = "CONFIG_ERROR"


class PresetNotFound(HarnessError):
    code = "PRESET_NOT_FOUND"
