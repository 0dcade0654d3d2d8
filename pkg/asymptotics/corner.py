"""
Corner dichotomy: the mixed derivative at a corner either matches the
sub-solution, takes the big root of the determinant equation, or has
direction-dependent limits
"""

import math
from typing import List, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel

from asymptotics.richardson import richardson_extrapolate
from asymptotics.roots import normal_form_jet, solve_mixed_quadratic
from core.config import Settings, get_settings
from core.exceptions import OutOfDomain, WindowTooSmall
from core.models import AffineMap, DichotomyClass, DichotomyVerdict, DirectionSeries
from solver.probes import hessian_at
from solver.solution import DiscreteSolution

logger = structlog.get_logger(__name__)

APPROACH_ANGLES = (math.pi / 6, math.pi / 4, math.pi / 3)


def _normal_to_grid(sol: DiscreteSolution, corner: np.ndarray, normalizing_map: AffineMap):
    """Base point and linear part of y -> grid coordinates, y the normal-form variable"""
    L_inv = np.linalg.inv(normalizing_map.linear)
    if sol.frame is None:
        return corner, L_inv
    F_inv = sol.frame.inverse()
    return F_inv.apply(corner), F_inv.linear @ L_inv


def feature_size(sol: DiscreteSolution) -> float:
    """Smallest extent of the grid's bounding box"""
    return float(sol.h * (min(sol.grid.shape) - 1))


def classify(
    u12: float, spread: float, small_root: float, big_root: float, tau_c2: float, tau_root: float
) -> DichotomyClass:
    """NotC2 first, then the big root, then the small root; a C^2 value near neither root is inconclusive"""
    if spread >= tau_c2:
        return DichotomyClass.NOT_C2
    if big_root - small_root >= tau_root and abs(u12 - big_root) <= tau_root:
        return DichotomyClass.PLUS_ROOT_BRANCH
    if abs(u12 - small_root) <= tau_root:
        return DichotomyClass.EQUALS_SUBSOLUTION
    return DichotomyClass.INCONCLUSIVE


def corner_jet_extract(
    sol: DiscreteSolution,
    corner: Sequence[float],
    f0: float,
    normalizing_map: Optional[AffineMap] = None,
    r0: Optional[float] = None,
    angles: Sequence[float] = APPROACH_ANGLES,
    settings: Optional[Settings] = None,
) -> DichotomyVerdict:
    """Extrapolated u_12 at a corner along several approach directions

    ``normalizing_map`` sends the local problem to the quarter-space normal
    form, x -> L x + t, with the corner taken to the origin. Probes sit at
    radii r0, r0/2, r0/4 (r0 defaults to an eighth of the feature size) and
    each direction is extrapolated to r = 0.
    """
    settings = settings or get_settings()
    p = np.asarray(corner, dtype=float)
    n = len(p)
    normalizing_map = normalizing_map or AffineMap.identity(n)
    base, M = _normal_to_grid(sol, p, normalizing_map)
    r0 = feature_size(sol) / 8.0 if r0 is None else r0
    radii = [r0, r0 / 2.0, r0 / 4.0]

    sigma_min = float(np.linalg.svd(M, compute_uv=False)[-1])
    if sigma_min * radii[-1] < 2.0 * sol.h:
        raise WindowTooSmall(
            "grid too coarse for three dyadic probe radii", {"r0": r0, "h": sol.h, "smallest_radius": radii[-1]}
        )

    series: List[DirectionSeries] = []
    for k, angle in enumerate(angles):
        d = np.zeros(n)
        d[0], d[1] = math.cos(angle), math.sin(angle)
        estimates = []
        for r in radii:
            x = base + M @ (r * d)
            try:
                H = hessian_at(sol, x)
            except OutOfDomain as e:
                raise WindowTooSmall("probe left the domain", {"radius": r, "angle": angle, **e.context}) from e
            estimates.append(float((M.T @ H @ M)[0, 1]))
        rich = richardson_extrapolate(estimates)
        series.append(
            DirectionSeries(
                direction_id=k, angle=angle, radii=radii, estimates=estimates, extrapolated=rich.extrapolated, order=rich.order
            )
        )

    limits = np.array([s.extrapolated for s in series])
    u12 = float(limits.mean())
    spread = float(limits.max() - limits.min())
    f_normal = f0 * float(np.linalg.det(normalizing_map.linear)) ** -2
    roots = solve_mixed_quadratic(normal_form_jet(n), f_normal)
    verdict = DichotomyVerdict(
        classification=classify(u12, spread, roots.small_root, roots.big_root, settings.tau_c2, settings.tau_root),
        estimated_u12=u12,
        direction_spread=spread,
        small_root=roots.small_root,
        big_root=roots.big_root,
        tau_c2=settings.tau_c2,
        tau_root=settings.tau_root,
        per_direction=series,
    )
    logger.info(
        "Corner classified",
        classification=verdict.classification.value,
        u12=u12,
        spread=spread,
        big_root=roots.big_root,
    )
    return verdict


class NecessityReport(BaseModel):
    corner_u12: float
    edge_limit_u12: float
    not_c2: bool


def necessity_check(u12_corner: float, u12_edge_limit: float, tol: float = 0.0) -> NecessityReport:
    """A negative corner value against a non-negative edge limit rules out C^2"""
    not_c2 = u12_corner < -tol and u12_edge_limit >= -tol
    return NecessityReport(corner_u12=u12_corner, edge_limit_u12=u12_edge_limit, not_c2=not_c2)
