"""
Tangent cones of polytopes and standalone polyhedral cones
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field
from scipy.linalg import null_space, orth
from scipy.optimize import linprog

from core.exceptions import DegenerateInput, MuOutOfRange, PointNotOnBoundary
from core.models import ArrayModel, FloatArray
from geometry.polytope import Polytope, polytope_from_halfspaces

logger = structlog.get_logger(__name__)


class TangentCone(ArrayModel):
    """{x : inward_normals @ (x - apex) >= 0}"""

    apex: FloatArray
    inward_normals: FloatArray = Field(..., description="(m, n) unit inward normals, one per cone facet")
    adjacent_pairs: List[Tuple[int, int]] = Field(
        default_factory=list, description="Pairs of cone facets sharing an (n-2)-face"
    )
    facet_ids: Optional[List[int]] = Field(None, description="Polytope facet behind each cone facet")
    generators: Optional[FloatArray] = Field(None, description="Unit edge directions when the apex is a vertex")
    lineality_dim: int = Field(..., ge=0)
    lineality_basis: FloatArray = Field(..., description="(n, l) orthonormal basis of the lineality space")
    pointed_basis: FloatArray = Field(..., description="(n, n-l) orthonormal basis of its complement")

    @property
    def dim(self) -> int:
        return self.apex.shape[0]

    @property
    def n_facets(self) -> int:
        return self.inward_normals.shape[0]

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        d = np.atleast_2d(np.asarray(points, dtype=float)) - self.apex
        return np.all(d @ self.inward_normals.T >= -tol, axis=1)

    def linear_image(self, linear: np.ndarray) -> "TangentCone":
        """The cone L(V - apex), with the same facet adjacency"""
        inv_t = np.linalg.inv(np.asarray(linear, dtype=float)).T
        normals = self.inward_normals @ inv_t.T
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        gens = None
        if self.generators is not None:
            gens = self.generators @ np.asarray(linear, dtype=float).T
            gens /= np.linalg.norm(gens, axis=1, keepdims=True)
        return make_cone(normals, np.zeros(self.dim), self.adjacent_pairs, self.facet_ids, gens)


def _split(normals: np.ndarray, n: int) -> Tuple[int, np.ndarray, np.ndarray]:
    if len(normals) == 0:
        return n, np.eye(n), np.zeros((n, 0))
    lineality = null_space(normals, rcond=1e-10)
    pointed = orth(normals.T, rcond=1e-10)
    return lineality.shape[1], lineality, pointed


def make_cone(
    normals: np.ndarray,
    apex: Sequence[float],
    adjacent_pairs: Sequence[Tuple[int, int]],
    facet_ids: Optional[Sequence[int]] = None,
    generators: Optional[np.ndarray] = None,
) -> TangentCone:
    apex = np.asarray(apex, dtype=float)
    l_dim, lineality, pointed = _split(normals, apex.shape[0])
    return TangentCone(
        apex=apex,
        inward_normals=normals,
        adjacent_pairs=[tuple(sorted(p)) for p in adjacent_pairs],
        facet_ids=None if facet_ids is None else list(facet_ids),
        generators=generators,
        lineality_dim=l_dim,
        lineality_basis=lineality,
        pointed_basis=pointed,
    )


def tangent_cone(P: Polytope, x0: Sequence[float], tol: Optional[float] = None) -> TangentCone:
    """Cone generated by P - x0 at a boundary point"""
    x0 = np.asarray(x0, dtype=float)
    eps = P.tol if tol is None else tol
    slack = P.slack(x0)[0]
    if np.any(slack < -eps):
        raise PointNotOnBoundary("point lies outside the polytope", {"point": x0.tolist()})
    active = np.flatnonzero(slack <= eps)
    if len(active) == 0:
        raise PointNotOnBoundary("point lies in the interior", {"point": x0.tolist()})

    local = {int(f): i for i, f in enumerate(active)}
    pairs = []
    for ridge in P.faces[P.dim - 2]:
        f, g = ridge.containing_facet_ids
        if f in local and g in local:
            pairs.append((local[f], local[g]))

    generators = None
    hits = np.flatnonzero(np.max(np.abs(P.vertices - x0), axis=1) <= eps)
    if len(hits):
        v = int(hits[0])
        dirs = []
        for edge in P.edges:
            if v in edge.vertex_ids:
                other = edge.vertex_ids[1] if edge.vertex_ids[0] == v else edge.vertex_ids[0]
                d = P.vertices[other] - P.vertices[v]
                dirs.append(d / np.linalg.norm(d))
        generators = np.array(dirs)

    return make_cone(P.normals[active], x0, pairs, active.tolist(), generators)


def _has_interior(normals: np.ndarray) -> bool:
    n = normals.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-normals, np.ones((len(normals), 1))])
    res = linprog(
        c, A_ub=a_ub, b_ub=np.zeros(len(normals)), bounds=[(-1, 1)] * n + [(None, 1)], method="highs"
    )
    return res.status == 0 and res.x[-1] > 1e-9


def cone_from_normals(normals: Sequence[Sequence[float]], apex: Optional[Sequence[float]] = None) -> TangentCone:
    """Standalone cone; adjacency read off the cone truncated by the box |y|_inf <= 1"""
    nu = np.asarray(normals, dtype=float)
    nu = nu / np.linalg.norm(nu, axis=1, keepdims=True)
    m, n = nu.shape
    if not _has_interior(nu):
        raise DegenerateInput("cone has empty interior")
    box = np.vstack([np.eye(n), -np.eye(n)])
    truncated = polytope_from_halfspaces(np.vstack([nu, box]), np.concatenate([np.zeros(m), -np.ones(2 * n)]))
    sources = truncated.facet_sources
    kept = [s for s in sources if s < m]
    if len(kept) < m:
        logger.warning("Redundant cone normals dropped", dropped=sorted(set(range(m)) - set(kept)))
    local = {fid: kept.index(src) for fid, src in enumerate(sources) if src < m}
    pairs = []
    for ridge in truncated.faces[n - 2]:
        f, g = ridge.containing_facet_ids
        if f in local and g in local:
            pairs.append((local[f], local[g]))
    apex = np.zeros(n) if apex is None else apex
    return make_cone(nu[kept], apex, pairs)


def v_mu_cone(mu: float, n: int = 2) -> TangentCone:
    """V_mu x R^(n-2): planar opening mu*pi in the (x1, x2) plane"""
    if not 0.0 < mu < 1.0:
        raise MuOutOfRange(f"mu must lie in (0, 1), got {mu}")
    first = np.zeros(n)
    first[1] = 1.0
    second = np.zeros(n)
    second[:2] = [np.sin(mu * np.pi), -np.cos(mu * np.pi)]
    return make_cone(np.array([first, second]), np.zeros(n), [(0, 1)])


def orthant_cone(n: int, k: Optional[int] = None) -> TangentCone:
    """(R_+)^k x R^(n-k)"""
    k = n if k is None else k
    normals = np.eye(n)[:k]
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    return make_cone(normals, np.zeros(n), pairs)


class SkeletonPoint(BaseModel):
    point: List[float]
    face_dim: int = Field(..., description="Dimension of the smallest face containing the point")


def sample_skeleton(P: Polytope, k: int, per_edge: int) -> List[SkeletonPoint]:
    """Vertices, interior edge samples and face centroids of Gamma_k"""
    samples = [SkeletonPoint(point=v.tolist(), face_dim=0) for v in P.vertices]
    if k >= 1:
        ts = np.linspace(0.0, 1.0, per_edge)[1:-1]
        for edge in P.edges:
            a, b = P.vertices[list(edge.vertex_ids)]
            samples.extend(SkeletonPoint(point=(a + t * (b - a)).tolist(), face_dim=1) for t in ts)
    for dim in range(2, k + 1):
        for face in P.faces[dim]:
            centroid = P.vertices[list(face.vertex_ids)].mean(axis=0)
            samples.append(SkeletonPoint(point=centroid.tolist(), face_dim=dim))
    return samples
