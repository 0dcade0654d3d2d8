"""
The mixed second derivative at an edge as a root of det D^2 u = f
"""

from typing import Tuple

import numpy as np
import structlog
from pydantic import BaseModel

from core.exceptions import DegenerateQuadratic, HypothesisViolated, NoRealRoot
from core.models import SecondOrderJet

logger = structlog.get_logger(__name__)


class MixedQuadratic(BaseModel):
    """a t^2 + b t + c = 0 in t = u_ij, with f already moved to the left"""

    a: float
    b: float
    c: float
    small_root: float
    big_root: float
    degenerate: bool = False


def _det_with(H: np.ndarray, pair: Tuple[int, int], t: float) -> float:
    i, j = pair
    M = H.copy()
    M[i, j] = M[j, i] = t
    return float(np.linalg.det(M))


def solve_mixed_quadratic(jet: SecondOrderJet, f: float, pair: Tuple[int, int] = (0, 1)) -> MixedQuadratic:
    """Expand det D^2 u - f in the unknown entry; every other entry must be known"""
    i, j = pair
    if i == j:
        raise ValueError("the unknown entry must be off-diagonal")
    H = np.array(jet.hessian, dtype=float)
    H[i, j] = H[j, i] = 0.0
    if np.any(np.isnan(H)):
        raise HypothesisViolated("Hessian entries other than the mixed pair must be known", {"pair": list(pair)})

    d_minus, d_zero, d_plus = (_det_with(H, pair, t) for t in (-1.0, 0.0, 1.0))
    a = 0.5 * (d_plus + d_minus) - d_zero
    b = 0.5 * (d_plus - d_minus)
    c = d_zero - f
    scale = max(1.0, abs(a), abs(b), abs(c))

    if abs(a) <= 1e-12 * scale:
        if abs(b) <= 1e-12 * scale:
            raise NoRealRoot("determinant does not depend on the mixed entry", {"c": c})
        root = -c / b
        return MixedQuadratic(a=a, b=b, c=c, small_root=root, big_root=root, degenerate=True)
    if a > 0:
        raise HypothesisViolated("leading coefficient must be negative", {"a": a})

    disc = b * b - 4 * a * c
    if disc < -1e-12 * scale**2:
        raise NoRealRoot("no real mixed derivative is compatible with f", {"discriminant": disc, "f": f})
    sq = np.sqrt(max(disc, 0.0))
    r1, r2 = (-b + sq) / (2 * a), (-b - sq) / (2 * a)
    return MixedQuadratic(a=a, b=b, c=c, small_root=min(r1, r2), big_root=max(r1, r2))


def mixed_root_big(jet: SecondOrderJet, f: float, pair: Tuple[int, int] = (0, 1)) -> float:
    """Larger root; +sqrt(1 - f) for the identity normal form"""
    q = solve_mixed_quadratic(jet, f, pair)
    if q.degenerate:
        logger.warning("Degenerate mixed quadratic", code=DegenerateQuadratic.code, root=q.big_root)
    return q.big_root


def normal_form_jet(n: int, base_point=None) -> SecondOrderJet:
    """Identity Hessian with the (1, 2) entry unknown"""
    H = np.eye(n)
    H[0, 1] = H[1, 0] = np.nan
    return SecondOrderJet.quadratic(H, base_point)
