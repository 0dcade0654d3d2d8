"""
Convex polytopes in vertex and half-space form with their face lattice
"""

import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from core.config import get_settings
from core.exceptions import DegenerateInput, InconsistentInput, UnboundedInput
from core.models import ArrayModel, FloatArray

logger = structlog.get_logger(__name__)


class HalfSpace(BaseModel):
    """{x : normal . x >= offset}"""

    normal: List[float]
    offset: float


class PolytopeSpec(BaseModel):
    """Portable polytope document; either representation may be given"""

    dim: Optional[int] = Field(None, ge=2)
    vertices: Optional[List[List[float]]] = None
    halfspaces: Optional[List[HalfSpace]] = None


class Face(BaseModel):
    model_config = ConfigDict(frozen=True)

    dim: int
    vertex_ids: Tuple[int, ...]
    containing_facet_ids: Tuple[int, ...]


class Polytope(ArrayModel):
    """Bounded full-dimensional convex polytope {x : normals @ x >= offsets}"""

    dim: int = Field(..., ge=2)
    vertices: FloatArray = Field(..., description="(m, n) vertex coordinates")
    normals: FloatArray = Field(..., description="(F, n) unit inward facet normals")
    offsets: FloatArray = Field(..., description="(F,) facet offsets")
    faces: List[List[Face]] = Field(..., description="faces[k] lists the k-faces, facets last")
    subfaces: List[List[List[int]]] = Field(
        ..., description="subfaces[k][i]: indices of the (k-1)-faces inside faces[k][i]"
    )
    tol: float = Field(..., description="Absolute on-plane tolerance used to build the lattice")
    facet_sources: List[int] = Field(
        default_factory=list, description="Input half-space index of each facet, when built from half-spaces"
    )

    @property
    def n_facets(self) -> int:
        return self.normals.shape[0]

    @property
    def facets(self) -> List[Face]:
        return self.faces[self.dim - 1]

    @property
    def edges(self) -> List[Face]:
        return self.faces[1]

    def slack(self, points) -> np.ndarray:
        """normals . x - offsets for each point (rows) and facet (columns)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.normals.T - self.offsets

    def contains(self, points, tol: Optional[float] = None) -> np.ndarray:
        eps = self.tol if tol is None else tol
        return np.all(self.slack(points) >= -eps, axis=1)

    def active_facets(self, point, tol: Optional[float] = None) -> np.ndarray:
        eps = self.tol if tol is None else tol
        return np.flatnonzero(np.abs(self.slack(point)[0]) <= eps)

    def halfspaces(self) -> List[HalfSpace]:
        return [HalfSpace(normal=list(map(float, nu)), offset=float(b)) for nu, b in zip(self.normals, self.offsets)]

    def to_spec(self) -> PolytopeSpec:
        return PolytopeSpec(dim=self.dim, vertices=self.vertices.tolist(), halfspaces=self.halfspaces())

    def f_vector(self) -> List[int]:
        return [len(level) for level in self.faces]

    def lattice_signature(self, decimals: int = 8) -> List[List[Tuple[Tuple[float, ...], ...]]]:
        """Face lattice keyed by vertex coordinates, independent of vertex numbering"""
        coords = [tuple(np.round(v, decimals) + 0.0) for v in self.vertices]
        return [
            sorted(tuple(sorted(coords[i] for i in face.vertex_ids)) for face in level)
            for level in self.faces
        ]

    def diameter(self) -> float:
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())


PolytopeInput = Union[PolytopeSpec, Dict, Polytope]


def _absolute_tol(points: np.ndarray, tol: Optional[float]) -> float:
    base = get_settings().geom_tol if tol is None else tol
    return base * max(1.0, float(np.abs(points).max()) if points.size else 1.0)


def _affine_dim(points: np.ndarray, tol: float) -> int:
    if len(points) <= 1:
        return 0
    return int(np.linalg.matrix_rank(points[1:] - points[0], tol=tol))


def _unique_rows(rows: np.ndarray, tol: float) -> np.ndarray:
    kept: List[np.ndarray] = []
    for row in rows:
        if not any(np.max(np.abs(row - k)) <= tol for k in kept):
            kept.append(row)
    return np.array(kept)


def _lexsorted(rows: np.ndarray, decimals: int = 9) -> np.ndarray:
    keys = np.round(rows, decimals)
    order = np.lexsort(keys.T[::-1])
    return rows[order]


def _hull_facets(points: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    try:
        hull = ConvexHull(points)
    except QhullError as e:
        raise DegenerateInput(f"convex hull failed: {e}") from e
    n = points.shape[1]
    planes = np.hstack([-hull.equations[:, :n], hull.equations[:, n:]])
    planes = _unique_rows(planes, max(1e-7, 1e3 * tol))
    planes = _lexsorted(planes)
    return planes[:, :n], planes[:, n]


def _face_lattice(vertices: np.ndarray, normals: np.ndarray, offsets: np.ndarray, tol: float):
    n = vertices.shape[1]
    incidence = np.abs(vertices @ normals.T - offsets) <= tol
    facet_sets = [frozenset(np.flatnonzero(incidence[:, f]).tolist()) for f in range(len(normals))]
    for f, ids in enumerate(facet_sets):
        if _affine_dim(vertices[sorted(ids)], tol) != n - 1:
            raise InconsistentInput(f"facet {f} touches an affinely degenerate vertex set", {"facet": f})

    levels: Dict[int, List[frozenset]] = {n - 1: list(facet_sets)}
    for k in range(n - 1, 0, -1):
        found = set()
        for face in levels[k]:
            for other in facet_sets:
                meet = face & other
                if meet and meet != face and meet not in found:
                    if _affine_dim(vertices[sorted(meet)], tol) == k - 1:
                        found.add(meet)
        levels[k - 1] = sorted(found, key=lambda s: tuple(sorted(s)))

    faces: List[List[Face]] = []
    for k in range(n):
        level = []
        for ids in levels[k]:
            facets = tuple(f for f, fs in enumerate(facet_sets) if ids <= fs)
            level.append(Face(dim=k, vertex_ids=tuple(sorted(ids)), containing_facet_ids=facets))
        faces.append(level)

    subfaces: List[List[List[int]]] = [[[] for _ in faces[0]]]
    for k in range(1, n):
        lower = [set(face.vertex_ids) for face in faces[k - 1]]
        subfaces.append(
            [[j for j, ids in enumerate(lower) if ids <= set(face.vertex_ids)] for face in faces[k]]
        )

    for ridge in faces[n - 2]:
        if len(ridge.containing_facet_ids) != 2:
            raise InconsistentInput(
                "an (n-2)-face must lie in exactly two facets",
                {"vertex_ids": list(ridge.vertex_ids), "facets": list(ridge.containing_facet_ids)},
            )
    return faces, subfaces


def _assemble(
    points: np.ndarray, normals: np.ndarray, offsets: np.ndarray, tol: float, sources: Optional[List[int]] = None
) -> Polytope:
    n = points.shape[1]
    slack = points @ normals.T - offsets
    if np.any(slack < -tol):
        raise InconsistentInput("a vertex violates a facet constraint")
    on_plane = np.abs(slack) <= tol
    is_vertex = np.array([np.linalg.matrix_rank(normals[row], tol=1e-8) == n if row.any() else False for row in on_plane])
    vertices = _lexsorted(points[is_vertex])
    faces, subfaces = _face_lattice(vertices, normals, offsets, tol)
    return Polytope(
        dim=n,
        vertices=vertices,
        normals=normals,
        offsets=offsets,
        faces=faces,
        subfaces=subfaces,
        tol=tol,
        facet_sources=list(range(len(normals))) if sources is None else sources,
    )


def polytope_from_vertices(points: Iterable[Sequence[float]], tol: Optional[float] = None) -> Polytope:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise DegenerateInput("vertices must be an (m, n) array with n >= 2")
    eps = _absolute_tol(pts, tol)
    pts = _unique_rows(pts, eps)
    n = pts.shape[1]
    if len(pts) <= n or _affine_dim(pts, eps) < n:
        raise DegenerateInput("vertex set is not full-dimensional", {"dim": n, "count": len(pts)})
    normals, offsets = _hull_facets(pts, eps)
    return _assemble(pts, normals, offsets, eps)


def _bounded_and_feasible(normals: np.ndarray, offsets: np.ndarray) -> None:
    n = normals.shape[1]
    for k in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[k] = -sign
            res = linprog(c, A_ub=-normals, b_ub=-offsets, bounds=[(None, None)] * n, method="highs")
            if res.status == 2:
                raise InconsistentInput("half-spaces have empty intersection")
            if res.status == 3:
                raise UnboundedInput("half-spaces do not bound a polytope", {"axis": k, "direction": sign})


def chebyshev_center(normals: np.ndarray, offsets: np.ndarray) -> Tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed ball"""
    n = normals.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-normals, np.ones((len(normals), 1))])
    res = linprog(c, A_ub=a_ub, b_ub=-offsets, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        raise InconsistentInput(f"Chebyshev LP failed: {res.message}")
    return res.x[:n], float(res.x[-1])


def polytope_from_halfspaces(
    normals: Iterable[Sequence[float]], offsets: Iterable[float], tol: Optional[float] = None
) -> Polytope:
    nu = np.asarray(normals, dtype=float)
    b = np.asarray(offsets, dtype=float)
    if nu.ndim != 2 or nu.shape[0] != b.shape[0]:
        raise DegenerateInput("normals must be (F, n) with one offset per normal")
    lengths = np.linalg.norm(nu, axis=1)
    if np.any(lengths <= 0):
        raise DegenerateInput("zero normal vector")
    nu, b = nu / lengths[:, None], b / lengths

    _bounded_and_feasible(nu, b)
    center, radius = chebyshev_center(nu, b)
    if radius <= (get_settings().geom_tol if tol is None else tol):
        raise DegenerateInput("half-spaces meet in a lower-dimensional set", {"inradius": radius})

    try:
        hsi = HalfspaceIntersection(np.hstack([-nu, b[:, None]]), center)
    except QhullError as e:
        raise DegenerateInput(f"half-space intersection failed: {e}") from e
    pts = hsi.intersections
    eps = _absolute_tol(pts, tol)
    pts = _unique_rows(pts, max(eps, 1e-8))

    # keep the caller's facet order, drop redundant and duplicate planes
    keep: List[int] = []
    for i, (normal, offset) in enumerate(zip(nu, b)):
        touching = pts[np.abs(pts @ normal - offset) <= eps]
        if _affine_dim(touching, eps) == nu.shape[1] - 1 and not any(
            np.allclose(normal, nu[j], atol=1e-9) and abs(offset - b[j]) <= eps for j in keep
        ):
            keep.append(i)
    if len(keep) < len(nu):
        logger.debug("Dropped redundant half-spaces", dropped=sorted(set(range(len(nu))) - set(keep)))
    return _assemble(pts, nu[keep], b[keep], eps, sources=keep)


def build_polytope(spec: PolytopeInput, tol: Optional[float] = None) -> Polytope:
    """Build from a PolytopeSpec (or equivalent dict); vertices win when both are given"""
    if isinstance(spec, Polytope):
        return spec
    if isinstance(spec, dict):
        spec = PolytopeSpec(**spec)
    if spec.vertices:
        P = polytope_from_vertices(spec.vertices, tol)
    elif spec.halfspaces:
        P = polytope_from_halfspaces([h.normal for h in spec.halfspaces], [h.offset for h in spec.halfspaces], tol)
    else:
        raise DegenerateInput("polytope spec has neither vertices nor half-spaces")
    if spec.dim is not None and spec.dim != P.dim:
        raise InconsistentInput(f"declared dim {spec.dim} but data is {P.dim}-dimensional")
    logger.debug("Polytope built", dim=P.dim, f_vector=P.f_vector())
    return P


def skeleton(P: Polytope, k: int) -> List[Face]:
    """All faces of dimension <= k; k = -1 gives the empty skeleton"""
    if k < -1 or k > P.dim - 1:
        raise ValueError(f"skeleton dimension must lie in [-1, {P.dim - 1}], got {k}")
    return [face for level in P.faces[: k + 1] for face in level]


def adjacent_facet_pairs(P: Polytope) -> List[Tuple[int, int]]:
    """Pairs of facets sharing an (n-2)-face"""
    pairs = {tuple(sorted(ridge.containing_facet_ids)) for ridge in P.faces[P.dim - 2]}
    return sorted(pairs)


def is_simple(P: Polytope) -> bool:
    return all(len(v.containing_facet_ids) == P.dim for v in P.faces[0])


def is_simplicial(P: Polytope) -> bool:
    return all(len(f.vertex_ids) == P.dim for f in P.facets)


def euler_characteristic(P: Polytope) -> int:
    return sum((-1) ** k * len(level) for k, level in enumerate(P.faces))


def read_polytope(path: Union[str, Path]) -> Polytope:
    with open(path) as fh:
        return build_polytope(PolytopeSpec(**json.load(fh)))


def write_polytope(P: Polytope, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        json.dump(P.to_spec().model_dump(), fh, indent=2)


def unit_cube(n: int = 3) -> Polytope:
    corners = np.array(np.meshgrid(*[[0.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
    return polytope_from_vertices(corners)


def cross_polytope(n: int = 3) -> Polytope:
    eye = np.eye(n)
    return polytope_from_vertices(np.vstack([eye, -eye]))


def standard_simplex(n: int = 3) -> Polytope:
    return polytope_from_vertices(np.vstack([np.zeros(n), np.eye(n)]))
