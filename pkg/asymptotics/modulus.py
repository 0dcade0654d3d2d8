"""
Empirical modulus of continuity of the discrete Hessian near a skeleton point
"""

import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy.spatial import cKDTree

from core.exceptions import WindowTooSmall
from solver.probes import centered_hessians
from solver.solution import DiscreteSolution


class ModulusReport(BaseModel):
    center: List[float]
    radii: List[float]
    omega: List[float]
    nodes: int


def modulus_of_continuity(
    sol: DiscreteSolution, point: Sequence[float], radii: Sequence[float], window: Optional[float] = None
) -> ModulusReport:
    """omega(r) = max |D2u(x) - D2u(y)| over |x - y| <= r, x and y in B(point, window)

    Hessians are the centered ones, so nodes next to the boundary drop out.
    The spectral norm measures the difference.
    """
    radii = sorted(float(r) for r in radii)
    window = 2.0 * radii[-1] if window is None else window
    center = np.asarray(point, dtype=float)
    grid_center = center if sol.frame is None else sol.frame.inverse().apply(center)
    pts, H = centered_hessians(sol)
    near = np.linalg.norm(pts - grid_center, axis=1) <= window
    if np.count_nonzero(near) < 2:
        raise WindowTooSmall("fewer than two Hessian nodes near the point", {"window": window, "h": sol.h})
    pts, H = pts[near], H[near]
    tree = cKDTree(pts)
    omega = []
    for r in radii:
        pairs = tree.query_pairs(r, output_type="ndarray")
        if len(pairs) == 0:
            omega.append(0.0)
            continue
        diff = H[pairs[:, 0]] - H[pairs[:, 1]]
        omega.append(float(np.max(np.linalg.norm(diff, ord=2, axis=(1, 2)))))
    return ModulusReport(center=center.tolist(), radii=radii, omega=omega, nodes=len(pts))


class MarginReport(BaseModel):
    margin: float
    eps: float
    margin_ok: bool
    modulus_bounded: Optional[bool] = None
    passed: bool


def modulus_margin_check(
    theta_max: Sequence[float], eps: float, modulus: Optional[ModulusReport] = None
) -> MarginReport:
    """pi/2 - Theta >= eps along the edge; with a modulus, also omega below eps at the smallest radius"""
    margin = math.pi / 2 - max(theta_max)
    margin_ok = margin >= eps
    bounded = None
    if modulus is not None:
        bounded = bool(modulus.omega[0] < eps)
    return MarginReport(
        margin=margin,
        eps=eps,
        margin_ok=margin_ok,
        modulus_bounded=bounded,
        passed=margin_ok and bounded is not False,
    )
