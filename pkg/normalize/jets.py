"""
Hessian normalization and the A_mu change of variables
"""

import numpy as np
import structlog

from core.config import get_settings
from core.exceptions import MuOutOfRange, NotPositiveDefinite
from core.models import AffineMap, SecondOrderJet

logger = structlog.get_logger(__name__)


def hessian_normalizer(H) -> AffineMap:
    """T = H^(-1/2), so that T^T H T = I"""
    h = np.asarray(H, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise NotPositiveDefinite(f"hessian must be square, got shape {h.shape}")
    if not np.allclose(h, h.T, atol=1e-10 * max(1.0, np.abs(h).max())):
        raise NotPositiveDefinite("hessian is not symmetric")
    w, q = np.linalg.eigh(0.5 * (h + h.T))
    if w[0] <= max(get_settings().angle_tol, 1e-14) * max(abs(w[-1]), 1.0):
        raise NotPositiveDefinite("hessian is not positive definite", {"eigenvalues": w.tolist()})
    return AffineMap(linear=(q / np.sqrt(w)) @ q.T)


def transform_jet(jet: SecondOrderJet, S: AffineMap) -> SecondOrderJet:
    """Jet of u o S at S^-1(x0)"""
    base = S.inverse().apply(jet.base_point)
    return SecondOrderJet(
        base_point=base,
        value=jet.value,
        gradient=S.linear.T @ jet.grad,
        hessian=S.linear.T @ jet.hessian @ S.linear,
    )


def _check_mu(mu: float) -> None:
    if not 0.0 < mu < 1.0:
        raise MuOutOfRange(f"mu must lie in (0, 1), got {mu}")


def a_mu_map(mu: float, n: int = 2) -> AffineMap:
    """Linear map sending V_mu x R^(n-2) onto the quarter-space (R_+)^2 x R^(n-2)"""
    _check_mu(mu)
    if n < 2:
        raise ValueError("n must be at least 2")
    a = np.eye(n)
    a[0, 1] = -1.0 / np.tan(mu * np.pi)
    a[1, 1] = 1.0 / np.sin(mu * np.pi)
    return AffineMap(linear=a)


def a_mu_rhs_factor(mu: float) -> float:
    """det(A_mu^-1)^2 = sin^2(mu pi): det D^2(u o A_mu^-1) = sin^2(mu pi) det D^2 u"""
    _check_mu(mu)
    return float(np.sin(mu * np.pi) ** 2)
