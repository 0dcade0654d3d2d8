"""
Dirichlet solves for det D^2 u = f on polygons, boxes, wedges and truncated cones
"""

import math
import time
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field
from scipy.optimize import brentq

from core.config import Settings, get_settings
from core.exceptions import NonConvexData, OutOfDomain, PinInfeasible, SolverError
from core.logging_config import log_solver_result
from core.models import ResidualReport
from geometry.cones import TangentCone
from solver.domains import ComputationalDomain, truncated_cone_domain
from solver.fields import ScalarField, as_field
from solver.grid import build_grid, build_operators
from solver.newton import convex_envelope, solve_scheme
from solver.probes import residual_report
from solver.scheme import MongeAmpereScheme, frames_for, stencil_vectors
from solver.solution import DiscreteSolution

logger = structlog.get_logger(__name__)


def scheme_id(dim: int, settings: Settings) -> str:
    if dim == 2:
        return f"wide-stencil-2d-w{settings.scheme_width}"
    return f"wide-stencil-3d-{settings.scheme_frames3d}"


def boundary_samples(grid, dom: ComputationalDomain, vectors) -> np.ndarray:
    """Boundary nodes plus the cut points where stencil rays from interior nodes leave the domain"""
    pts = grid.points()
    x = pts[grid.interior]
    samples = [pts[grid.boundary]]
    for v in vectors:
        step = grid.h * np.asarray(v, dtype=float)
        for d in (step, -step):
            t = dom.ray_exit(x, d)
            cut = t < 1.0
            samples.append(x[cut] + t[cut, None] * d)
    return np.unique(np.round(np.vstack(samples), 12), axis=0)


def _problem_in_solver_frame(dom: ComputationalDomain, f: ScalarField, phi: ScalarField):
    if dom.affine_precompose is None:
        return dom, f, phi
    S = dom.affine_precompose
    scale = S.determinant**2
    return dom.to_solver_frame(), f.pullback(S.linear, S.offset, scale), phi.pullback(S.linear, S.offset)


def solve_dirichlet(
    dom: ComputationalDomain,
    f,
    phi,
    h: Optional[float] = None,
    settings: Optional[Settings] = None,
    initial: Optional[DiscreteSolution] = None,
) -> DiscreteSolution:
    """Monotone-scheme solution of det D^2 u = f, u = phi on the boundary"""
    settings = settings or get_settings()
    h = settings.grid_h if h is None else h
    start = time.time()
    work, f_w, phi_w = _problem_in_solver_frame(dom, as_field(f), as_field(phi))

    grid = build_grid(work, h, settings.snap_fraction)
    interior, boundary = grid.interior, grid.boundary
    if len(interior) == 0:
        raise OutOfDomain("grid has no interior nodes", {"h": h})
    pts = grid.points()
    values = np.full(grid.size, np.nan)
    values[boundary] = phi_w(pts[boundary])
    rhs = f_w(pts[interior])
    if np.any(~np.isfinite(rhs)) or np.any(rhs < 0):
        raise SolverError("right-hand side must be finite and non-negative", {"min": float(np.nanmin(rhs))})

    frames = frames_for(grid.dim, settings.scheme_width, settings.scheme_frames3d)
    vectors = stencil_vectors(frames)
    operators = build_operators(grid, work, vectors, phi_w, values)
    scheme = MongeAmpereScheme(operators, frames, rhs, settings.scheme_delta)

    guess = None
    if initial is not None and initial.grid.shape == grid.shape and initial.grid.lower == grid.lower:
        guess = initial.values[interior]
    if guess is None and settings.initial_guess == "convex_envelope":
        samples = boundary_samples(grid, work, vectors)
        guess = convex_envelope(samples, phi_w(samples), pts[interior])
    u, iterations, residual = solve_scheme(scheme, settings, h, guess)
    values[interior] = u

    warnings: List[str] = []
    violations = scheme.convexity_violations(u, 10.0 * h * h)
    if violations:
        warnings.append(f"{NonConvexData.code}: {violations} second differences below -10h^2")
        logger.warning("Discrete convexity violated", violations=violations, h=h)

    elapsed = round((time.time() - start) * 1000, 2)
    log_solver_result(dom.kind, h, len(interior), iterations, residual, elapsed)
    return DiscreteSolution(
        grid=grid,
        values=values,
        domain=work,
        frame=dom.affine_precompose,
        iterations=iterations,
        residual=residual,
        convexity_violations=violations,
        monotone_scheme_id=scheme_id(grid.dim, settings),
        warnings=warnings,
        elapsed_ms=elapsed,
    )


def sample_field(dom: ComputationalDomain, h: float, field, settings: Optional[Settings] = None) -> DiscreteSolution:
    """Grid function of an analytic field, for oracle checks of probes and fits"""
    settings = settings or get_settings()
    field = as_field(field)
    grid = build_grid(dom, h, settings.snap_fraction)
    values = np.full(grid.size, np.nan)
    inside = grid.flat_status >= 0
    values[inside] = field(grid.points()[inside])
    return DiscreteSolution(grid=grid, values=values, domain=dom, monotone_scheme_id="sampled")


def pin_boundary_data(cone: TangentCone, R: float, s: float) -> ScalarField:
    """|x|^2/2 + s min_i(nu_i . x) / R; equals |x|^2/2 on the lateral boundary"""
    normals = cone.inward_normals

    def data(x):
        x = np.atleast_2d(x)
        return 0.5 * np.sum(x**2, axis=1) + s * np.min(x @ normals.T, axis=1) / R

    return ScalarField.from_callable(data, label=f"|x|^2/2 + {s:.6g}*min(nu.x)/{R:g}")


def solve_truncated_cone(
    cone: TangentCone,
    R: float,
    c: float,
    pin: Optional[Tuple[Sequence[float], float]] = None,
    outer=None,
    h: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> DiscreteSolution:
    """det D^2 v = c on V cap B_R with v = |x|^2/2 on the lateral boundary"""
    if c <= 0:
        raise SolverError("c must be positive")
    settings = settings or get_settings()
    dom = truncated_cone_domain(cone, R)
    f = ScalarField.constant(c)
    if pin is None:
        phi = ScalarField.half_square_norm() if outer is None else as_field(outer)
        return solve_dirichlet(dom, f, phi, h, settings)

    p0 = np.asarray(pin[0], dtype=float)
    a = float(pin[1])
    if a >= 0.5 or not cone.contains(p0)[0] or abs(np.linalg.norm(p0) - 1.0) > 1e-9:
        raise PinInfeasible("pin needs p0 on the unit sphere inside the cone and a < 1/2", {"p0": p0.tolist(), "a": a})

    last: List[DiscreteSolution] = []

    def gap(s: float) -> float:
        sol = solve_dirichlet(dom, f, pin_boundary_data(cone, R, s), h, settings, initial=last[-1] if last else None)
        last.append(sol)
        return float(sol.evaluate(p0[None, :])[0]) - a

    g0 = gap(0.0)
    if abs(g0) <= settings.pin_tol:
        return last[-1].model_copy(update={"pin_shift": 0.0})
    direction = -1.0 if g0 > 0 else 1.0
    lo, step = 0.0, 1.0
    bracket = None
    for _ in range(settings.pin_max_expand):
        s = direction * step
        if np.sign(gap(s)) != np.sign(g0):
            bracket = (min(lo, s), max(lo, s))
            break
        lo, step = s, 2.0 * step
    if bracket is None:
        raise PinInfeasible("shooting failed to bracket the pin value", {"last_shift": direction * step})

    s_star = brentq(gap, *bracket, xtol=settings.pin_tol / 4)
    final = solve_dirichlet(dom, f, pin_boundary_data(cone, R, s_star), h, settings, initial=last[-1])
    value = float(final.evaluate(p0[None, :])[0])
    if abs(value - a) > settings.pin_tol:
        raise PinInfeasible("shooting converged outside the pin tolerance", {"value": value, "target": a})
    logger.info("Pinned conic solve", shift=s_star, value=value, target=a, solves=len(last) + 1)
    return final.model_copy(update={"pin_shift": s_star})


class Ladder(BaseModel):
    solutions: List[DiscreteSolution]
    report: ResidualReport


def solve_ladder(
    dom: ComputationalDomain,
    f,
    phi,
    hs: Sequence[float],
    exact: Optional[Callable] = None,
    settings: Optional[Settings] = None,
) -> Ladder:
    """Solves on a refinement sequence; the report carries the observed rate"""
    solutions = [solve_dirichlet(dom, f, phi, h, settings) for h in sorted(hs, reverse=True)]
    return Ladder(solutions=solutions, report=residual_report(solutions[-1], solutions, exact))


def liouville_upper_bound(c: float, n: int = 2) -> ScalarField:
    """|x|^2/2 + sqrt(1 - c) x1 x2"""
    if not 0 < c <= 1:
        raise SolverError("the comparison quadratic needs 0 < c <= 1")
    k = math.sqrt(1.0 - c)
    square = "x1^2 + x2^2" if n == 2 else "x1^2 + x2^2 + x3^2"
    return ScalarField.from_expression(f"0.5*({square}) + k*x1*x2", {"k": k})


class SandwichReport(BaseModel):
    max_excess: float = Field(..., description="max over nodes of u - bound")
    worst_node: List[float]
    slack: float
    passed: bool


def check_sandwich(sol: DiscreteSolution, c: float, slack: Optional[float] = None) -> SandwichReport:
    bound = liouville_upper_bound(c, sol.dim)
    pts, vals = sol.nodes()
    if sol.frame is not None:
        pts = sol.frame.apply(pts)
    excess = vals - bound(pts)
    worst = int(np.argmax(excess))
    slack = 2.0 * sol.h if slack is None else slack
    return SandwichReport(
        max_excess=float(excess[worst]), worst_node=pts[worst].tolist(), slack=slack, passed=bool(excess[worst] <= slack)
    )
