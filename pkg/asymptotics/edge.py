"""
Singular-mode fit along the edge of a wedge V_mu x I

u - |x|^2/2 = c(x3) r'^(1/mu) sin(theta'/mu) + O(r'^3)
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from core.config import Settings, get_settings
from core.exceptions import FitIllConditioned, HypothesisViolated, WindowTooSmall
from core.models import ExpansionFit, SecondOrderJet
from solver.fields import ScalarField
from solver.solution import DiscreteSolution

logger = structlog.get_logger(__name__)

MAX_CONDITION = 1e10


def polar(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(r', theta') in the plane orthogonal to the edge"""
    pts = np.atleast_2d(points)
    return np.hypot(pts[:, 0], pts[:, 1]), np.arctan2(pts[:, 1], pts[:, 0])


def singular_mode(points: np.ndarray, mu: float) -> np.ndarray:
    r, theta = polar(points)
    return r ** (1.0 / mu) * np.sin(theta / mu)


def edge_oracle_field(mu: float, c: float, q: float = 0.0, half_length: Optional[float] = None) -> ScalarField:
    """|x|^2/2 + c r'^(1/mu) sin(theta'/mu) chi(x3) + q r'^3

    chi = (1 - (x3/half_length)^2)^2 when half_length is given, 1 otherwise.
    """

    def value(x):
        x = np.atleast_2d(x)
        chi = 1.0 if half_length is None else (1.0 - np.minimum((x[:, 2] / half_length) ** 2, 1.0)) ** 2
        r = np.hypot(x[:, 0], x[:, 1])
        return 0.5 * np.sum(x**2, axis=1) + c * chi * singular_mode(x, mu) + q * r**3

    return ScalarField.from_callable(value, label=f"|x|^2/2 + {c:g}*r'^(1/mu) sin(theta'/mu) + {q:g}*r'^3")


def _slice_level(sol: DiscreteSolution, x3: float) -> float:
    axis = sol.grid.axes()[2]
    return float(axis[np.argmin(np.abs(axis - x3))])


def _fit_slice(pts: np.ndarray, w: np.ndarray, mu: float) -> float:
    r, _ = polar(pts)
    design = np.column_stack([singular_mode(pts, mu), r**3])
    if len(w) < 3:
        raise FitIllConditioned("too few nodes in the fit window", {"nodes": int(len(w))})
    s = np.linalg.svd(design, compute_uv=False)
    if s[-1] <= 0 or s[0] / s[-1] > MAX_CONDITION:
        raise FitIllConditioned("fit basis is ill-conditioned on the window", {"condition": float(s[0] / max(s[-1], 1e-300))})
    coef, *_ = np.linalg.lstsq(design, w, rcond=None)
    return float(coef[0])


def edge_expansion_fit(
    sol: DiscreteSolution,
    mu: float,
    x3_samples: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
    settings: Optional[Settings] = None,
) -> ExpansionFit:
    """Least-squares c(x3) per slice, and the decay rate of what the mode leaves behind"""
    settings = settings or get_settings()
    if not 1.0 / 3.0 < mu < 0.5:
        raise HypothesisViolated("edge expansion needs mu in (1/3, 1/2)", {"mu": mu})
    if sol.dim != 3:
        raise HypothesisViolated("edge expansion needs a 3-D solution")

    if window is None:
        radius = sol.domain.quadric.radius if sol.domain is not None and sol.domain.quadric is not None else 1.0
        window = (radius / 8.0, radius / 2.0)
    r_min, r_max = window
    if r_min < 2.0 * sol.h or r_max < 4.0 * r_min - 1e-12:
        raise WindowTooSmall("fit window must span three dyadic radii at least 2h from the edge", {"window": list(window), "h": sol.h})

    pts, vals = sol.nodes()
    if sol.frame is not None:
        pts = sol.frame.apply(pts)
    w = vals - 0.5 * np.sum(pts**2, axis=1)
    r, _ = polar(pts)

    coefficients: List[float] = []
    remainder_r: List[np.ndarray] = []
    remainder: List[np.ndarray] = []
    for x3 in x3_samples:
        on_slice = np.abs(pts[:, 2] - _slice_level(sol, x3)) < 0.5 * sol.h
        in_window = on_slice & (r >= r_min) & (r <= r_max)
        c = _fit_slice(pts[in_window], w[in_window], mu)
        coefficients.append(c)
        near = on_slice & (r <= r_max)
        remainder_r.append(r[near])
        remainder.append(np.abs(w[near] - c * singular_mode(pts[near], mu)))

    r_all = np.concatenate(remainder_r)
    rem_all = np.concatenate(remainder)
    radii = [r_max, r_max / 2.0, r_max / 4.0]
    sups = [float(rem_all[r_all <= rk].max()) if np.any(r_all <= rk) else 0.0 for rk in radii]
    if max(sups) <= 1e-12:
        rate = float("inf")
    else:
        floor = max(max(sups) * 1e-12, 1e-300)
        rate = float(np.polyfit(np.log(radii), np.log(np.maximum(sups, floor)), 1)[0])

    fit = ExpansionFit(
        exponent=1.0 / mu,
        x3_samples=[float(s) for s in x3_samples],
        coefficient_c=coefficients,
        quadratic_part=SecondOrderJet.quadratic(np.eye(3)),
        residual_decay_rate=rate,
        decay_radii=radii,
        decay_residuals=sups,
        fit_window=(r_min, r_max),
        valid=rate > 1.0 / mu,
    )
    logger.info("Edge expansion fitted", mu=mu, c=coefficients, decay_rate=rate, noise_floor=settings.c_noise_floor)
    return fit


def coefficient_is_zero(fit: ExpansionFit, settings: Optional[Settings] = None) -> bool:
    settings = settings or get_settings()
    return bool(np.max(np.abs(fit.coefficient_c)) < settings.c_noise_floor)
