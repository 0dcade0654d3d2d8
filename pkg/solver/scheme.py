"""
Monotone wide-stencil discretization of det D^2 u

MA_h u = min over orthogonal frames (v_1..v_n) of
    prod_j max(D_vj u, delta) + sum_j min(D_vj u - delta, 0)
where D_v is the cut-cell second difference along the unit direction v.
"""

from math import gcd
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp

from solver.grid import DirectionalOperator

Vector = Tuple[int, ...]
Frame = Tuple[Vector, ...]


def frames_2d(width: int) -> List[Frame]:
    """Pairs (v, v_perp) of primitive vectors with entries at most width"""
    frames = []
    for p in range(1, width + 1):
        for q in range(0, width + 1):
            if gcd(p, q) == 1:
                frames.append(((p, q), (-q, p)))
    return frames


def frames_3d(family: str = "full") -> List[Frame]:
    frames: List[Frame] = [((1, 0, 0), (0, 1, 0), (0, 0, 1))]
    frames += [
        ((1, 1, 0), (-1, 1, 0), (0, 0, 1)),
        ((1, 0, 0), (0, 1, 1), (0, -1, 1)),
        ((1, 0, 1), (0, 1, 0), (-1, 0, 1)),
    ]
    if family == "full":
        for a in (1, -1):
            for b in (1, -1):
                frames.append(((a, b, 1), (b, -a, 0), (a, b, -2)))
    return frames


def frames_for(dim: int, width: int, family: str) -> List[Frame]:
    if dim == 2:
        return frames_2d(width)
    if dim == 3:
        return frames_3d(family)
    raise ValueError(f"the scheme supports n = 2, 3, got n = {dim}")


def canonical(v: Vector) -> Vector:
    """D_v = D_-v; keep one representative"""
    for c in v:
        if c != 0:
            return v if c > 0 else tuple(-x for x in v)
    return v


def stencil_vectors(frames: List[Frame]) -> List[Vector]:
    seen: Dict[Vector, None] = {}
    for frame in frames:
        for v in frame:
            seen.setdefault(canonical(v), None)
    return list(seen)


class MongeAmpereScheme:
    """Residual and Jacobian of MA_h u - f on the interior unknowns"""

    def __init__(
        self,
        operators: Dict[Vector, DirectionalOperator],
        frames: List[Frame],
        rhs: np.ndarray,
        delta: float,
    ):
        self.operators = operators
        self.frames = [tuple(canonical(v) for v in frame) for frame in frames]
        self.rhs = rhs
        self.delta = delta
        self.dim = len(self.frames[0])

    @property
    def size(self) -> int:
        return len(self.rhs)

    def second_differences(self, u: np.ndarray) -> Dict[Vector, np.ndarray]:
        return {key: op(u) for key, op in self.operators.items()}

    def _frame_values(self, diffs: Dict[Vector, np.ndarray]) -> np.ndarray:
        """(frames, dim, m) array of directional second differences"""
        return np.array([[diffs[v] for v in frame] for frame in self.frames])

    def operator(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        D = self._frame_values(self.second_differences(u))
        clipped = np.maximum(D, self.delta)
        values = np.prod(clipped, axis=1) + np.sum(np.minimum(D - self.delta, 0.0), axis=1)
        active = np.argmin(values, axis=0)
        return values[active, np.arange(self.size)], active, D

    def residual(self, u: np.ndarray) -> np.ndarray:
        return self.operator(u)[0] - self.rhs

    def residual_and_jacobian(self, u: np.ndarray) -> Tuple[np.ndarray, sp.csr_matrix]:
        ma, active, D = self.operator(u)
        clipped = np.maximum(D, self.delta)
        J = sp.csr_matrix((self.size, self.size))
        for k, frame in enumerate(self.frames):
            rows = active == k
            if not np.any(rows):
                continue
            for j, v in enumerate(frame):
                others = np.prod(np.delete(clipped[k], j, axis=0), axis=0)
                weight = np.where(D[k, j] >= self.delta, others, 1.0) * rows
                J = J + sp.diags(weight) @ self.operators[v].A
        return ma - self.rhs, J.tocsr()

    def laplacian(self) -> DirectionalOperator:
        """Sum of the coordinate-axis second differences"""
        axes = [tuple(int(i == k) for i in range(self.dim)) for k in range(self.dim)]
        A = sum(self.operators[a].A for a in axes)
        g = sum(self.operators[a].g for a in axes)
        return DirectionalOperator(np.zeros(self.dim, dtype=int), A, g)

    def convexity_violations(self, u: np.ndarray, tol: float) -> int:
        return int(sum(np.count_nonzero(d < -tol) for d in self.second_differences(u).values()))
