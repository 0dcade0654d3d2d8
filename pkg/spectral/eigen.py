"""
First Dirichlet eigenvalue of spherical cross-sections of cones
"""

import math
from typing import List, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from core.config import get_settings
from core.exceptions import MeshFailure, NonConvergedEigenSolve, OpeningOutOfRange
from core.logging_config import log_eigen_result
from core.models import EigenResult, GapReport, MeshLevel
from geometry.cones import TangentCone, make_cone
from spectral.sphere_mesh import SphereMesh, assemble, build_mesh

logger = structlog.get_logger(__name__)

_MIN_LEVELS = 2
_MAX_LEVELS = 8


class SphericalDomain(BaseModel):
    """V cap S^(n-1): an arc (n = 2) or a geodesic polygon given by inward normals (n = 3)"""

    n: int = Field(..., ge=2, le=3)
    opening: Optional[float] = Field(None, description="Arc length, n = 2")
    normals: Optional[List[List[float]]] = Field(None, description="Cone inward normals, n = 3")
    adjacent_pairs: List[Tuple[int, int]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_kind(self) -> "SphericalDomain":
        if self.n == 2 and self.opening is None:
            raise ValueError("an arc needs its opening")
        if self.n == 3 and not self.normals:
            raise ValueError("a spherical polygon needs cone normals")
        return self

    @classmethod
    def from_cone(cls, cone: TangentCone) -> "SphericalDomain":
        if cone.dim == 2:
            return cls(n=2, opening=cone_opening(cone))
        return cls(n=3, normals=cone.inward_normals.tolist(), adjacent_pairs=cone.adjacent_pairs)

    def cone(self) -> TangentCone:
        return make_cone(np.array(self.normals, dtype=float), np.zeros(3), self.adjacent_pairs)


def exponent_from_lambda(lambda1: float, n: int) -> float:
    """Positive root of mu (mu + n - 2) = lambda1"""
    if lambda1 <= 0:
        raise ValueError(f"lambda1 must be positive, got {lambda1}")
    return (-(n - 2) + math.sqrt((n - 2) ** 2 + 4.0 * lambda1)) / 2.0


def cone_opening(cone: TangentCone) -> float:
    """Opening angle of a planar cone"""
    if cone.dim != 2:
        raise OpeningOutOfRange("opening is defined for planar cones only")
    if cone.n_facets == 1:
        return math.pi
    if cone.n_facets != 2:
        raise OpeningOutOfRange("a planar cone has at most two facets")
    nu = cone.inward_normals
    c = float(np.clip(nu[0] @ nu[1] / (np.linalg.norm(nu[0]) * np.linalg.norm(nu[1])), -1.0, 1.0))
    return math.pi - math.acos(c)


def lambda1_arc(opening: float) -> EigenResult:
    """(pi / opening)^2, exact"""
    if not 0.0 < opening < 2.0 * math.pi:
        raise OpeningOutOfRange(f"opening must lie in (0, 2pi), got {opening}")
    mu = math.pi / opening
    return EigenResult(n=2, lambda1=mu * mu, exponent_mu=mu, lambda2=(2.0 * mu) ** 2, lambda2_gt_3=4.0 * mu * mu > 3)


def _solve_level(mesh: SphereMesh) -> Tuple[float, float, np.ndarray]:
    K, M = assemble(mesh)
    free = np.flatnonzero(~mesh.boundary)
    if len(free) < 3:
        raise MeshFailure("too few interior nodes", {"interior": int(len(free))})
    K = K[free][:, free]
    M = M[free][:, free]
    try:
        vals, vecs = eigsh(K, k=2, M=M, sigma=0.0, which="LM")
    except (ArpackNoConvergence, ArpackError) as e:
        raise NonConvergedEigenSolve(f"eigen solve failed: {e}") from e
    order = np.argsort(vals)
    phi = np.zeros(len(mesh.nodes))
    first = vecs[:, order[0]]
    phi[free] = first if first.sum() >= 0 else -first
    return float(vals[order[0]]), float(vals[order[1]]), phi


def lambda1_spherical(dom: SphericalDomain, mesh_h: Optional[float] = None) -> EigenResult:
    """P1 eigenvalue on refined geodesic meshes, Richardson-extrapolated over the last two levels"""
    if dom.n == 2:
        return lambda1_arc(dom.opening)
    mesh_h = get_settings().eigen_mesh_h if mesh_h is None else mesh_h
    if mesh_h <= 0:
        raise MeshFailure("mesh_h must be positive")
    cone = dom.cone()

    ladder: List[MeshLevel] = []
    results = []
    level = 0
    while True:
        mesh = build_mesh(cone.inward_normals, cone.adjacent_pairs, cone.lineality_basis, level)
        if level >= _MIN_LEVELS:
            lam1, lam2, phi = _solve_level(mesh)
            ladder.append(MeshLevel(mesh_h=mesh.mesh_h, triangles=len(mesh.triangles), lambda1=lam1))
            results.append((lam1, lam2, phi, mesh))
            if mesh.mesh_h <= mesh_h and len(results) >= 2:
                break
        if level >= _MAX_LEVELS:
            raise MeshFailure("mesh size not reached within the refinement limit", {"mesh_h": mesh.mesh_h})
        level += 1

    coarse, fine = results[-2][0], results[-1][0]
    lam_ext = (4.0 * fine - coarse) / 3.0
    error = abs(lam_ext - fine)
    _, lam2, phi, mesh = results[-1]
    mu = exponent_from_lambda(lam_ext, 3)
    log_eigen_result(3, lam_ext, mu, mesh.mesh_h, error)
    return EigenResult(
        n=3,
        lambda1=lam_ext,
        exponent_mu=mu,
        mesh_size=mesh.mesh_h,
        estimated_error=error,
        lambda2=lam2,
        lambda2_gt_3=lam2 > 3.0,
        ladder=ladder,
        nodes=mesh.nodes,
        eigenfunction=phi,
    )


def eigenvalue_gap_check(cone: TangentCone, mesh_h: Optional[float] = None) -> GapReport:
    """lambda1 - 2n, and whether the exponent exceeds 2"""
    n = cone.dim
    if n == 2:
        result = lambda1_arc(cone_opening(cone))
    elif n == 3:
        result = lambda1_spherical(SphericalDomain.from_cone(cone), mesh_h)
    else:
        raise MeshFailure(f"eigenvalues are computed for n = 2, 3 only, got n = {n}")
    gap = result.lambda1 - 2 * n
    applicable = gap > get_settings().gap_rel_tol * 2 * n
    logger.info("Eigenvalue gap", n=n, lambda1=result.lambda1, gap=gap, applicable=applicable)
    return GapReport(gap=gap, liouville_applicable=applicable, eigen=result)
