"""
Damped Newton iteration with a pseudo-transient fallback
"""

from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
import structlog
from scipy.sparse.linalg import spsolve
from scipy.spatial import ConvexHull, QhullError

from core.config import Settings
from core.exceptions import NewtonDiverged
from core.logging_config import log_solver_progress
from solver.scheme import MongeAmpereScheme

logger = structlog.get_logger(__name__)


def convex_envelope(boundary_points, boundary_values, points) -> Optional[np.ndarray]:
    """Lower convex envelope of the lifted boundary data, evaluated at points

    The envelope is the max of the affine functions of the lower facets of
    conv{(x, phi(x))}. A point above the data keeps the hull full-dimensional
    when the lift is flat. Returns None when qhull cannot build the hull.
    """
    xb = np.atleast_2d(np.asarray(boundary_points, dtype=float))
    zb = np.asarray(boundary_values, dtype=float)
    x = np.atleast_2d(np.asarray(points, dtype=float))
    top = np.append(xb.mean(axis=0), zb.max() + 1.0 + np.ptp(zb))
    try:
        hull = ConvexHull(np.vstack([np.column_stack([xb, zb]), top]))
    except QhullError as e:
        logger.warning("Convex envelope unavailable", reason=str(e).split("\n")[0], nodes=len(xb))
        return None
    eq = hull.equations
    lower = eq[eq[:, -2] < -1e-12]
    # normal_x . x + normal_z z + offset = 0 on each lower facet
    planes = -(x @ lower[:, :-2].T + lower[:, -1]) / lower[:, -2]
    return planes.max(axis=1)


def poisson_guess(scheme: MongeAmpereScheme) -> np.ndarray:
    """Solve Delta_h u = n f^(1/n), the opt-in initial guess; exact for |x|^2/2 with f = 1"""
    lap = scheme.laplacian()
    rhs = scheme.dim * np.power(np.maximum(scheme.rhs, 0.0), 1.0 / scheme.dim)
    return spsolve(lap.A.tocsc(), rhs - lap.g)


def _inf(r: np.ndarray) -> float:
    return float(np.max(np.abs(r))) if r.size else 0.0


def newton(scheme: MongeAmpereScheme, u: np.ndarray, settings: Settings) -> Tuple[np.ndarray, int, float, bool]:
    """Backtracking Newton on ||G||_inf; returns (u, iterations, residual, converged)"""
    G, J = scheme.residual_and_jacobian(u)
    norm = _inf(G)
    for it in range(1, settings.newton_max_iter + 1):
        if norm < settings.newton_tol:
            return u, it - 1, norm, True
        du = spsolve(J.tocsc(), -G)
        if not np.all(np.isfinite(du)):
            logger.warning("Singular Newton system", iteration=it)
            return u, it, norm, False
        alpha = 1.0
        for _ in range(settings.newton_max_damping + 1):
            trial = u + alpha * du
            trial_norm = _inf(scheme.residual(trial))
            if trial_norm < (1.0 - 1e-4 * alpha) * norm:
                break
            alpha *= 0.5
        else:
            logger.info("Newton stalled", iteration=it, residual=norm)
            return u, it, norm, False
        u = trial
        G, J = scheme.residual_and_jacobian(u)
        norm = _inf(G)
        log_solver_progress("newton", it, norm, alpha)
    return u, settings.newton_max_iter, norm, norm < settings.newton_tol


def pseudo_transient(
    scheme: MongeAmpereScheme, u: np.ndarray, settings: Settings, h: float
) -> Tuple[np.ndarray, int, float, bool]:
    """Implicit steps of u_t = G(u) with switched-evolution-relaxation time steps"""
    eye = sp.identity(scheme.size, format="csr")
    tau = h * h
    G, J = scheme.residual_and_jacobian(u)
    norm = _inf(G)
    for it in range(1, settings.ptc_max_iter + 1):
        if norm < settings.newton_tol:
            return u, it - 1, norm, True
        du = spsolve((eye / tau - J).tocsc(), G)
        u = u + du
        G, J = scheme.residual_and_jacobian(u)
        new_norm = _inf(G)
        tau = float(np.clip(tau * norm / max(new_norm, 1e-300), h * h, 1e12))
        norm = new_norm
        log_solver_progress("pseudo-time", it, norm, tau)
    return u, settings.ptc_max_iter, norm, norm < settings.newton_tol


def solve_scheme(
    scheme: MongeAmpereScheme, settings: Settings, h: float, initial: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, int, float]:
    u = poisson_guess(scheme) if initial is None else np.array(initial, dtype=float)
    u, it_newton, norm, ok = newton(scheme, u, settings)
    if ok:
        return u, it_newton, norm
    logger.info("Switching to pseudo-time continuation", residual=norm)
    u, it_ptc, norm, ok = pseudo_transient(scheme, u, settings, h)
    if not ok:
        u, it_tail, norm, ok = newton(scheme, u, settings)
        it_ptc += it_tail
    if not ok:
        raise NewtonDiverged(
            "nonlinear solve did not reach the tolerance",
            {"residual": norm, "tolerance": settings.newton_tol, "iterations": it_newton + it_ptc},
        )
    return u, it_newton + it_ptc, norm
