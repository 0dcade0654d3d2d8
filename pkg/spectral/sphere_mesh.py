"""
Geodesic triangulations of spherical polygons and P1 Laplace-Beltrami assembly
"""

from typing import List, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import Field

from core.exceptions import MeshFailure
from core.models import ArrayModel, FloatArray


class SphereMesh(ArrayModel):
    nodes: FloatArray = Field(..., description="(N, 3) unit vectors")
    triangles: np.ndarray = Field(..., description="(T, 3) node indices")
    boundary: np.ndarray = Field(..., description="(N,) True on the polygon boundary")

    @property
    def mesh_h(self) -> float:
        tri = self.triangles
        edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        return float(np.linalg.norm(self.nodes[edges[:, 0]] - self.nodes[edges[:, 1]], axis=1).max())


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _cyclic_order(n_facets: int, pairs: List[Tuple[int, int]]) -> List[int]:
    neighbours = {i: [] for i in range(n_facets)}
    for i, j in pairs:
        neighbours[i].append(j)
        neighbours[j].append(i)
    if any(len(v) != 2 for v in neighbours.values()):
        raise MeshFailure("cross-section is not a simple spherical polygon", {"adjacency": neighbours})
    order = [0, neighbours[0][0]]
    while len(order) < n_facets:
        a, b = neighbours[order[-1]]
        nxt = a if a != order[-2] else b
        if nxt == order[0]:
            raise MeshFailure("facet adjacency splits into several cycles")
        order.append(nxt)
    return order


def _coarse_polygon(normals: np.ndarray, pairs) -> Tuple[np.ndarray, np.ndarray]:
    order = _cyclic_order(len(normals), pairs)
    corners = []
    for a, b in zip(order, order[1:] + order[:1]):
        d = _unit(np.cross(normals[a], normals[b]))
        if np.sum(normals @ d) < 0:
            d = -d
        if np.any(normals @ d < -1e-9):
            raise MeshFailure("polygon corner falls outside the cone")
        corners.append(d)
    corners = np.array(corners)
    center = _unit(corners.sum(axis=0))
    return np.vstack([center, corners]), _fan(len(corners))


def _coarse_lune(normals: np.ndarray, axis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mids = []
    for i in (0, 1):
        m = _unit(np.cross(axis, normals[i]))
        if normals[1 - i] @ m < 0:
            m = -m
        mids.append(m)
    center = _unit(mids[0] + mids[1])
    corners = np.array([axis, mids[0], -axis, mids[1]])
    return np.vstack([center, corners]), _fan(4)


def _coarse_hemisphere(normal: np.ndarray, basis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    u, v = basis[:, 0], basis[:, 1]
    corners = np.array([u, v, -u, -v])
    return np.vstack([normal, corners]), _fan(4)


def _fan(m: int) -> np.ndarray:
    return np.array([[0, 1 + k, 1 + (k + 1) % m] for k in range(m)])


def refine(nodes: np.ndarray, triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split every triangle into four through normalized edge midpoints"""
    m = len(triangles)
    edges = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]), axis=1)
    unique, inverse = np.unique(edges, axis=0, return_inverse=True)
    mids = _unit(nodes[unique[:, 0]] + nodes[unique[:, 1]])
    idx = inverse.ravel().reshape(3, m) + len(nodes)
    a, b, c = triangles.T
    m01, m12, m20 = idx
    new = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([m01, b, m12], axis=1),
            np.stack([m20, m12, c], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    return np.vstack([nodes, mids]), new


def coarse_mesh(normals: np.ndarray, pairs, lineality: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    nu = _unit(np.asarray(normals, dtype=float))
    l_dim = lineality.shape[1]
    if l_dim == 0:
        if len(nu) < 3:
            raise MeshFailure("pointed cone needs at least three facets")
        return _coarse_polygon(nu, pairs)
    if l_dim == 1 and len(nu) == 2:
        return _coarse_lune(nu, lineality[:, 0])
    if l_dim == 2 and len(nu) == 1:
        return _coarse_hemisphere(nu[0], lineality)
    raise MeshFailure("cross-section is not a connected spherical domain", {"lineality_dim": l_dim})


def build_mesh(normals, pairs, lineality: np.ndarray, levels: int) -> SphereMesh:
    nodes, triangles = coarse_mesh(normals, pairs, lineality)
    for _ in range(levels):
        nodes, triangles = refine(nodes, triangles)
    nu = _unit(np.asarray(normals, dtype=float))
    boundary = np.min(np.abs(nodes @ nu.T), axis=1) <= 1e-12
    return SphereMesh(nodes=nodes, triangles=triangles, boundary=boundary)


def assemble(mesh: SphereMesh) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """P1 stiffness and mass matrices on the flat triangles"""
    p = mesh.nodes[mesh.triangles]
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    area = 0.5 * np.linalg.norm(np.cross(e[:, 0], e[:, 1]), axis=1)
    if np.any(area <= 0):
        raise MeshFailure("degenerate triangle in the spherical mesh")
    stiff = np.einsum("tik,tjk->tij", e, e) / (4.0 * area[:, None, None])
    local_mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    mass = area[:, None, None] * local_mass

    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = len(mesh.nodes)
    K = sp.coo_matrix((stiff.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((mass.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, M
