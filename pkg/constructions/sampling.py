"""
Sample sets for the sampled certificates: interior grids and boundary points
"""

from typing import Optional

import numpy as np

from geometry.cones import sample_skeleton
from geometry.polytope import Polytope

MAX_PER_AXIS = 257


def grid_per_axis(n: int, max_points: int, cap: int = MAX_PER_AXIS) -> int:
    return max(3, min(int(round(max_points ** (1.0 / n))), cap))


def interior_grid(P: Polytope, max_points: int, cap: int = MAX_PER_AXIS) -> np.ndarray:
    """Tensor grid over the bounding box, restricted to the closed polytope"""
    m = grid_per_axis(P.dim, max_points, cap)
    lo, hi = P.vertices.min(axis=0), P.vertices.max(axis=0)
    axes = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
    return pts[P.contains(pts)]


def boundary_samples(P: Polytope, count: int, seed: int = 0, levels: int = 20) -> np.ndarray:
    """Skeleton samples, dyadic points along every edge toward both ends and random facet points"""
    rng = np.random.default_rng(seed)
    parts = [np.array([s.point for s in sample_skeleton(P, 1, 17)])]
    t = 2.0 ** -np.arange(1, levels + 1)
    for edge in P.edges:
        a, b = P.vertices[list(edge.vertex_ids)]
        parts.append(a + t[:, None] * (b - a))
        parts.append(b + t[:, None] * (a - b))
    per_facet = max(1, count // max(P.n_facets, 1))
    for facet in P.facets:
        corners = P.vertices[list(facet.vertex_ids)]
        weights = rng.dirichlet(np.ones(len(corners)), size=per_facet)
        parts.append(weights @ corners)
    return np.vstack(parts)


def boundary_pairs(points: np.ndarray, count: int, seed: int = 0, min_gap: Optional[float] = None) -> np.ndarray:
    """Random index pairs (i, j) with |x_i - x_j| at least min_gap"""
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(points), size=count)
    j = rng.integers(0, len(points), size=count)
    gap = np.linalg.norm(points[i] - points[j], axis=1)
    keep = gap > (0.0 if min_gap is None else min_gap)
    return np.column_stack([i[keep], j[keep]])
