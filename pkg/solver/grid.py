"""
Cartesian grids with boundary-cut stencils
"""

from typing import Callable, Dict, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import Field

from core.exceptions import OutOfDomain
from core.models import ArrayModel
from solver.domains import ComputationalDomain

OUTSIDE, INTERIOR, BOUNDARY = -1, 0, 1


class Grid(ArrayModel):
    """Nodes h * (lower + index) covering a domain"""

    h: float = Field(..., gt=0)
    lower: Tuple[int, ...] = Field(..., description="Integer coordinates of the first node")
    shape: Tuple[int, ...]
    status: np.ndarray = Field(..., description="OUTSIDE / INTERIOR / BOUNDARY per node, grid-shaped")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self):
        return [self.h * (lo + np.arange(m)) for lo, m in zip(self.lower, self.shape)]

    def points(self) -> np.ndarray:
        """(N, n) coordinates in C order"""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def flat_status(self) -> np.ndarray:
        return self.status.ravel()

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.flat_status == INTERIOR)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.flat_status == BOUNDARY)

    def multi_index(self, flat: np.ndarray) -> np.ndarray:
        return np.stack(np.unravel_index(flat, self.shape), axis=1)

    def shifted(self, flat: np.ndarray, offset) -> Tuple[np.ndarray, np.ndarray]:
        """Flat index of node + offset and whether it lies on the grid"""
        idx = self.multi_index(flat) + np.asarray(offset, dtype=int)
        ok = np.all((idx >= 0) & (idx < np.array(self.shape)), axis=1)
        safe = np.where(ok[:, None], idx, 0)
        return np.ravel_multi_index(tuple(safe.T), self.shape), ok

    def nearest(self, point) -> int:
        p = np.asarray(point, dtype=float)
        idx = np.rint(p / self.h).astype(int) - np.array(self.lower)
        if np.any(idx < 0) or np.any(idx >= np.array(self.shape)):
            raise OutOfDomain("point lies outside the grid", {"point": p.tolist()})
        flat = int(np.ravel_multi_index(tuple(idx), self.shape))
        if self.flat_status[flat] == OUTSIDE:
            raise OutOfDomain("nearest node lies outside the domain", {"point": p.tolist()})
        return flat


def build_grid(domain: ComputationalDomain, h: float, snap_fraction: float) -> Grid:
    lo, hi = domain.bounding_box()
    lower = np.floor(lo / h - 1e-9).astype(int)
    upper = np.ceil(hi / h + 1e-9).astype(int)
    shape = tuple(int(m) for m in upper - lower + 1)
    axes = [h * (a + np.arange(m)) for a, m in zip(lower, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    margin = domain.margin(pts)
    snap = snap_fraction * h
    status = np.full(len(pts), OUTSIDE, dtype=int)
    status[margin > snap] = INTERIOR
    status[(margin >= -snap) & (margin <= snap)] = BOUNDARY
    return Grid(h=h, lower=tuple(int(a) for a in lower), shape=shape, status=status.reshape(shape))


class DirectionalOperator:
    """(A, g) with A u + g approximating the second derivative along a unit direction"""

    def __init__(self, vector, A: sp.csr_matrix, g: np.ndarray):
        self.vector = np.asarray(vector, dtype=int)
        self.A = A
        self.g = g

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.A @ u + self.g


def directional_operator(
    grid: Grid,
    domain: ComputationalDomain,
    vector,
    boundary_values: np.ndarray,
    phi: Callable[[np.ndarray], np.ndarray],
    unknown_of: np.ndarray,
) -> DirectionalOperator:
    """Second difference along an integer vector, with cut steps where the ray leaves the domain"""
    v = np.asarray(vector, dtype=int)
    interior = grid.interior
    pts = grid.points()
    x = pts[interior]
    m = len(interior)
    rows, cols, vals = [], [], []
    g = np.zeros(m)
    diag = np.zeros(m)
    step = grid.h * v

    arms = {}
    for sign in (1, -1):
        nbr, on_grid = grid.shifted(interior, sign * v)
        state = np.where(on_grid, grid.flat_status[nbr], OUTSIDE)
        frac = np.ones(m)
        cut = state == OUTSIDE
        if np.any(cut):
            frac[cut] = np.clip(domain.ray_exit(x[cut], sign * step), 1e-6, 1.0)
        arms[sign] = (nbr, state, frac, cut)

    sf, sb = arms[1][2], arms[-1][2]
    for sign in (1, -1):
        nbr, state, frac, cut = arms[sign]
        coef = 2.0 / ((sf + sb) * frac) / (grid.h**2 * float(v @ v))
        diag -= coef
        inside = state == INTERIOR
        rows.append(np.flatnonzero(inside))
        cols.append(unknown_of[nbr[inside]])
        vals.append(coef[inside])
        on_bdry = state == BOUNDARY
        g[on_bdry] += coef[on_bdry] * boundary_values[nbr[on_bdry]]
        if np.any(cut):
            exit_pts = x[cut] + (sign * frac[cut])[:, None] * step
            g[cut] += coef[cut] * phi(exit_pts)

    rows.append(np.arange(m))
    cols.append(np.arange(m))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    return DirectionalOperator(v, A, g)


def build_operators(
    grid: Grid, domain: ComputationalDomain, vectors, phi, boundary_values: np.ndarray
) -> Dict[Tuple[int, ...], DirectionalOperator]:
    unknown_of = np.full(grid.size, -1, dtype=int)
    unknown_of[grid.interior] = np.arange(len(grid.interior))
    return {
        tuple(int(c) for c in v): directional_operator(grid, domain, v, boundary_values, phi, unknown_of)
        for v in vectors
    }
