"""
Smooth sub-solutions on simple polytopes from vertex quadratics and the convex bump
"""

from typing import List, Optional, Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field

from constructions.barrier import BarrierFunction, CutoffTerm, ProfileTerm
from constructions.profiles import corner_bump
from constructions.sampling import interior_grid
from core.config import Settings, get_settings
from core.exceptions import ACheckFailed, C0TooSmall
from core.models import ArrayModel, SecondOrderJet
from geometry.polytope import Polytope, is_simple
from normalize.angles import satisfies_a_condition, theta_functionals

logger = structlog.get_logger(__name__)

QuadraticInput = Union[SecondOrderJet, np.ndarray, Sequence[Sequence[float]]]


def vertex_normals(P: Polytope, vertex: int) -> np.ndarray:
    return P.normals[list(P.faces[0][vertex].containing_facet_ids)]


def vertex_adapted_hessian(normals, cos_target: float = -0.25) -> np.ndarray:
    """H = N^T K^-1 N, so the H-normalized facet normals have pairwise cosine cos_target

    With cos_target < 0 every normalized dihedral angle is pi - arccos(cos_target) < pi/2.
    """
    N = np.asarray(normals, dtype=float)
    n = N.shape[1]
    if N.shape != (n, n):
        raise ACheckFailed("vertex is not simple", {"facets": int(N.shape[0]), "dim": n})
    if not -1.0 / (n - 1) < cos_target < 1.0:
        raise ValueError(f"cos_target must lie in (-1/{n - 1}, 1) to give a positive definite Gram matrix")
    K = (1.0 - cos_target) * np.eye(n) + cos_target * np.ones((n, n))
    H = N.T @ np.linalg.solve(K, N)
    return 0.5 * (H + H.T)


class SubsolutionReport(BaseModel):
    C0: float
    C0_required: float
    eps0: float
    delta0: float
    lambda0: float
    vertex_theta: List[float] = Field(..., description="Theta of the sub-solution at each vertex")
    strong_a_condition: bool
    min_hessian_eigenvalue: float
    convex: bool
    samples: int
    passed: bool


class Subsolution(ArrayModel):
    barrier: BarrierFunction
    report: SubsolutionReport


def _hessian(q: QuadraticInput) -> np.ndarray:
    return q.hessian if isinstance(q, SecondOrderJet) else np.asarray(q, dtype=float)


def _required_c0(vertex: np.ndarray, w: np.ndarray, H: np.ndarray, pts: np.ndarray, eps0: float, delta0: float):
    """Smallest C0 with C0 l - P >= 0 on the sample and >= 2 eps0 off B(vertex, delta0)"""
    y = pts - vertex
    ell = y @ w
    quad = 0.5 * np.einsum("ij,jk,ik->i", y, H, y)
    far = np.linalg.norm(y, axis=1) >= delta0
    ok = ell > 1e-14
    need = np.where(far, quad + 2 * eps0, quad)[ok] / ell[ok]
    return float(need.max()) if need.size else 0.0


def _bump_subsolution(
    P: Polytope,
    quadratics: Optional[Sequence[QuadraticInput]],
    C0: Optional[float],
    eps0: float,
    lambda0: float,
    delta0: Optional[float],
    cos_target: float,
    settings: Settings,
) -> Subsolution:
    if not is_simple(P):
        raise ACheckFailed("polytope is not simple", {"f_vector": P.f_vector()})
    m = len(P.vertices)
    if quadratics is None:
        hessians = [vertex_adapted_hessian(vertex_normals(P, i), cos_target) for i in range(m)]
    else:
        if len(quadratics) != m:
            raise ACheckFailed("need one quadratic per vertex", {"vertices": m, "given": len(quadratics)})
        hessians = [_hessian(q) for q in quadratics]

    for i, (p, H) in enumerate(zip(P.vertices, hessians)):
        theta = theta_functionals(SecondOrderJet.quadratic(H, p), P).theta_max
        if not satisfies_a_condition(theta, strong=True):
            raise ACheckFailed("vertex quadratic misses the strong A-condition", {"vertex": i, "theta_max": theta})

    if delta0 is None:
        gaps = np.linalg.norm(P.vertices[:, None] - P.vertices[None], axis=-1)
        delta0 = 0.25 * float(gaps[gaps > 0].min())
    pts = np.vstack([interior_grid(P, settings.max_probes, cap=41), P.vertices])
    directions = [vertex_normals(P, i).sum(axis=0) for i in range(m)]
    required = max(
        _required_c0(p, w, H, pts, eps0, delta0) for p, w, H in zip(P.vertices, directions, hessians)
    )
    if C0 is None:
        C0 = 1.25 * required
    elif C0 < required:
        raise C0TooSmall("C0 too small for the sampled closure", {"C0": C0, "required": required})

    g = corner_bump(eps0)
    terms = [ProfileTerm(g, C0, w, p, H) for p, w, H in zip(P.vertices, directions, hessians)]
    r_out = eps0 / (C0 * max(np.linalg.norm(w) for w in directions))
    terms.append(CutoffTerm(P.vertices, 0.5 * r_out, r_out, np.zeros(P.dim), lambda0))
    barrier = BarrierFunction(terms, label=f"bump sub-solution (C0={C0:.4g}, eps0={eps0:g})", dim=P.dim)

    vertex_hessians = barrier.hessian(P.vertices)
    thetas = [
        theta_functionals(SecondOrderJet.quadratic(Hv, p), P).theta_max for p, Hv in zip(P.vertices, vertex_hessians)
    ]
    strong = all(satisfies_a_condition(t, strong=True) for t in thetas)
    eig_min = float(np.linalg.eigvalsh(barrier.hessian(pts)).min())
    convex = eig_min >= -1e-10
    report = SubsolutionReport(
        C0=C0,
        C0_required=required,
        eps0=eps0,
        delta0=delta0,
        lambda0=lambda0,
        vertex_theta=thetas,
        strong_a_condition=strong,
        min_hessian_eigenvalue=eig_min,
        convex=convex,
        samples=len(pts),
        passed=strong and convex,
    )
    logger.info(
        "Sub-solution assembled",
        dim=P.dim,
        vertices=m,
        C0=C0,
        theta_max=max(thetas),
        min_eigenvalue=eig_min,
        passed=report.passed,
    )
    return Subsolution(barrier=barrier, report=report)


def simple_subsolution_3d(
    P: Polytope,
    quadratics: Optional[Sequence[QuadraticInput]] = None,
    C0: Optional[float] = None,
    lambda0: float = 1e-6,
    eps0: float = 0.1,
    delta0: Optional[float] = None,
    cos_target: float = -0.25,
    settings: Optional[Settings] = None,
) -> Subsolution:
    """u0 = sum g(C0 l_i - P_i) plus lambda0 chi |x|^2 on a simple 3-polytope

    l_i = w_i.(x - p_i) with w_i the sum of the inward normals at p_i; P_i the
    vertex quadratic. C0 is taken as 1.25 times the sampled minimum when not given.
    """
    if P.dim != 3:
        raise ACheckFailed("expected a 3-dimensional polytope", {"dim": P.dim})
    return _bump_subsolution(P, quadratics, C0, eps0, lambda0, delta0, cos_target, settings or get_settings())


def planar_subsolution(
    P: Polytope,
    quadratics: Optional[Sequence[QuadraticInput]] = None,
    C0: Optional[float] = None,
    lambda0: float = 1e-6,
    eps0: float = 0.1,
    delta0: Optional[float] = None,
    cos_target: float = -0.25,
    settings: Optional[Settings] = None,
) -> Subsolution:
    """Planar version of the same recipe; every polygon is simple"""
    if P.dim != 2:
        raise ACheckFailed("expected a polygon", {"dim": P.dim})
    return _bump_subsolution(P, quadratics, C0, eps0, lambda0, delta0, cos_target, settings or get_settings())
