"""
Explicit barrier below the Dirichlet solution when f is small away from the vertices

u0 = L + h(|A(x - p0)|) + sum_i g_i + bulk, with
  L        the affine part of phi at the anchor vertex p0,
  A        the square root of a determinant-raised copy of the boundary Hessian at p0,
  g_i      g(C0 w_i.(x - p_i) - 2 F^(1/n) |x - p_i|^2) + 5 eps0/4 at the other vertices,
  bulk     delta^6 chi |x - p0|^2 by default, or a heavier radial ramp for larger f.
"""

from typing import List, Literal, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, Field

from asymptotics.roots import solve_mixed_quadratic
from constructions.barrier import (
    AffineTerm,
    BarrierFunction,
    BarrierTerm,
    ProfileTerm,
    RadialTerm,
    fd_gradient,
    fd_hessian,
)
from constructions.profiles import corner_bump, radial_ramp, barrier_h_profile
from constructions.sampling import boundary_pairs, boundary_samples, interior_grid
from core.config import Settings, get_settings
from core.exceptions import (
    ACheckFailed,
    BoundaryDominationFailed,
    DeterminantDominationFailed,
    HypothesisViolated,
    NotUniformlyConvex,
)
from core.models import ArrayModel, SecondOrderJet
from geometry.polytope import Polytope
from solver.fields import ScalarField, as_field

logger = structlog.get_logger(__name__)

RHO_GRID = 101


def uniform_convexity_constant(
    P: Polytope, phi: ScalarField, pairs: Optional[int] = None, settings: Optional[Settings] = None
) -> float:
    """Sampled min of (phi(x) - phi(y) - Dphi(y).(x - y)) / |x - y|^2 over boundary pairs"""
    settings = settings or get_settings()
    pts = boundary_samples(P, settings.boundary_pairs, seed=settings.seed)
    idx = boundary_pairs(pts, pairs or settings.boundary_pairs, seed=settings.seed, min_gap=1e-3 * P.diameter())
    x, y = pts[idx[:, 0]], pts[idx[:, 1]]
    grad = fd_gradient(phi, y, 1e-6 * max(1.0, P.diameter()))
    gap = phi(x) - phi(y) - np.sum(grad * (x - y), axis=1)
    return float(np.min(gap / np.sum((x - y) ** 2, axis=1)))


class VerificationReport(BaseModel):
    boundary_samples: int
    boundary_ok: bool
    boundary_worst_excess: float = Field(..., description="max (u0 - phi) over boundary samples")
    boundary_worst_point: List[float]
    interior_samples: int
    determinant_ok: bool
    determinant_worst_margin: float = Field(..., description="min (det D2u0 - f) over interior samples")
    determinant_worst_point: List[float]
    uniform_convexity: Optional[float] = None
    rho: Optional[float] = None
    passed: bool


class BarrierResult(ArrayModel):
    barrier: BarrierFunction
    report: VerificationReport


def check_barrier(
    barrier: BarrierFunction,
    P: Polytope,
    f: ScalarField,
    phi: ScalarField,
    settings: Optional[Settings] = None,
) -> VerificationReport:
    """u0 <= phi on boundary samples and det D2u0 >= f on an interior grid"""
    settings = settings or get_settings()
    bpts = boundary_samples(P, settings.boundary_pairs, seed=settings.seed)
    excess = barrier(bpts) - phi(bpts)
    b_worst = int(np.argmax(excess))
    ipts = interior_grid(P, settings.max_probes)
    margin = np.linalg.det(barrier.hessian(ipts)) - f(ipts)
    d_worst = int(np.argmin(margin))
    boundary_ok = bool(excess[b_worst] <= 1e-12)
    determinant_ok = bool(margin[d_worst] >= -1e-12)
    return VerificationReport(
        boundary_samples=len(bpts),
        boundary_ok=boundary_ok,
        boundary_worst_excess=float(excess[b_worst]),
        boundary_worst_point=bpts[b_worst].tolist(),
        interior_samples=len(ipts),
        determinant_ok=determinant_ok,
        determinant_worst_margin=float(margin[d_worst]),
        determinant_worst_point=ipts[d_worst].tolist(),
        passed=boundary_ok and determinant_ok,
    )


def _edge_directions(P: Polytope, vertex: int) -> np.ndarray:
    """Unit edge directions out of a vertex, as columns"""
    p = P.vertices[vertex]
    out = []
    for edge in P.edges:
        if vertex in edge.vertex_ids:
            other = [v for v in edge.vertex_ids if v != vertex][0]
            d = P.vertices[other] - p
            out.append(d / np.linalg.norm(d))
    E = np.array(out).T
    if E.shape != (P.dim, P.dim):
        raise ACheckFailed("anchor vertex is not simple", {"vertex": vertex, "edges": len(out)})
    return E


def _edge_hessian(P: Polytope, vertex: int, hessian: np.ndarray, f0: float, E: np.ndarray) -> np.ndarray:
    """Hessian of the boundary quadratic in edge coordinates y, x = p0 + E y

    In the plane only the edge second derivatives are boundary data; the mixed
    entry is the big root of det = f0 det(E)^2.
    """
    M = E.T @ hessian @ E
    if P.dim == 2:
        jet = SecondOrderJet.quadratic(np.array([[M[0, 0], np.nan], [np.nan, M[1, 1]]]))
        M[0, 1] = M[1, 0] = solve_mixed_quadratic(jet, f0 * np.linalg.det(E) ** 2).big_root
    return M


def raised_quadratic(M: np.ndarray, kappa: float, target: float) -> tuple:
    """(1 - 2 kappa) Diag(M) + (1 - rho) Off(M) with the smallest grid rho reaching det >= target"""
    diag = np.diag(np.diag(M))
    off = M - diag
    for rho in np.linspace(0.0, 1.0, RHO_GRID):
        Mk = (1.0 - 2.0 * kappa) * diag + (1.0 - rho) * off
        if np.all(np.linalg.eigvalsh(Mk) > 0) and np.linalg.det(Mk) >= target:
            return Mk, float(rho)
    return None, None


def small_f_barrier(
    P: Polytope,
    f,
    phi,
    delta: float = 0.15 ** (1.0 / 3.0),
    vertex_data: Optional[Sequence[SecondOrderJet]] = None,
    anchor: int = 0,
    kappa: float = 0.1,
    omega: Optional[float] = None,
    eps0: Optional[float] = None,
    C0: float = 2.5,
    bulk: Literal["cutoff", "radial"] = "cutoff",
    bulk_weight: float = 0.2,
    ramp_start: float = 0.01,
    ramp_width: float = 0.02,
    strict: bool = True,
    settings: Optional[Settings] = None,
) -> BarrierResult:
    """Assemble u0 and certify it by sampling

    ``vertex_data`` carries the jets of phi at the vertices; missing jets are
    taken from finite differences of phi. ``omega`` defaults to kappa/2.
    ``bulk="cutoff"`` adds delta^6 chi |x - p0|^2, with chi |x - p0|^2 realized as
    2 k(|x - p0|) for the convex ramp k switching on between delta^6/2 and
    delta^6: it vanishes near p0, stays below |x - p0|^2 and has Hessian 2I far
    away. Its determinant floor in the flat region is about 4 delta^12, so it
    certifies f up to roughly 0.002 at the default delta. ``bulk="radial"`` uses
    ``bulk_weight`` times the ramp from ``ramp_start`` over ``ramp_width``.
    """
    settings = settings or get_settings()
    f, phi = as_field(f), as_field(phi)
    n = P.dim
    if n not in (2, 3):
        raise HypothesisViolated("the barrier is built for n = 2 or 3", {"dim": n})
    if not 0 < delta < 1:
        raise HypothesisViolated("delta must lie in (0, 1)", {"delta": delta})
    omega = kappa / 2.0 if omega is None else omega
    eps0 = delta**3 / 4.0 if eps0 is None else eps0

    c = uniform_convexity_constant(P, phi, settings=settings)
    if c <= 1e-9:
        raise NotUniformlyConvex("boundary data is not uniformly convex on the sampled pairs", {"constant": c})

    p0 = P.vertices[anchor]
    if vertex_data is not None:
        jet = vertex_data[anchor]
        value, grad, hess = jet.value, jet.grad, jet.hessian
    else:
        value = float(phi(p0)[0])
        grad = fd_gradient(phi, p0, 1e-6)[0]
        hess = fd_hessian(phi, p0, 1e-4)[0]
    f0 = float(f(p0)[0])
    ipts = interior_grid(P, settings.max_probes)
    F = f.sup if f.sup is not None else float(f(ipts).max())

    E = _edge_directions(P, anchor)
    M = _edge_hessian(P, anchor, 0.5 * (hess + hess.T), f0, E)
    Mk, rho = raised_quadratic(M, kappa, (f0 + 2.0 * omega) * np.linalg.det(E) ** 2)
    if Mk is None:
        raise DeterminantDominationFailed(
            "no raised boundary quadratic reaches f(p0) + 2 omega", {"point": p0.tolist(), "f0": f0, "omega": omega}
        )
    w, q = np.linalg.eigh(Mk)
    A = (q * np.sqrt(w)) @ q.T @ np.linalg.inv(E)

    terms: List[BarrierTerm] = [AffineTerm(value, grad, p0), RadialTerm(barrier_h_profile(delta), A, p0)]
    g = corner_bump(eps0)
    Q = 4.0 * F ** (1.0 / n) * np.eye(n)
    for i, p in enumerate(P.vertices):
        if i == anchor:
            continue
        normals = P.normals[list(P.faces[0][i].containing_facet_ids)]
        direction = normals.sum(axis=0)
        terms.append(ProfileTerm(g, C0, direction / np.linalg.norm(direction), p, Q, shift=1.25 * eps0))
    if bulk == "radial":
        terms.append(RadialTerm(radial_ramp(ramp_start, ramp_width), np.eye(n), p0, weight=bulk_weight))
    else:
        r = delta**6
        # 2 k(r) with k'' in [0, 1]: convex and at most r^2
        terms.append(RadialTerm(radial_ramp(0.5 * r, 0.5 * r), np.eye(n), p0, weight=2.0 * r))
    barrier = BarrierFunction(terms, label=f"small-f barrier (delta={delta:.4g}, bulk={bulk})", dim=n)

    report = check_barrier(barrier, P, f, phi, settings).model_copy(update={"uniform_convexity": c, "rho": rho})
    logger.info(
        "Barrier verified",
        dim=n,
        rho=rho,
        boundary_excess=report.boundary_worst_excess,
        det_margin=report.determinant_worst_margin,
        passed=report.passed,
    )
    if strict and not report.boundary_ok:
        raise BoundaryDominationFailed(
            "u0 exceeds phi on the boundary",
            {"point": report.boundary_worst_point, "excess": report.boundary_worst_excess},
        )
    if strict and not report.determinant_ok:
        raise DeterminantDominationFailed(
            "det D2u0 falls below f",
            {"point": report.determinant_worst_point, "margin": report.determinant_worst_margin},
        )
    return BarrierResult(barrier=barrier, report=report)
