"""
Boundary data and right-hand sides for the edge-regularity counterexample

Domain {x1, x2 > 0, 2(x1 + x2) < x3 < 10}. Along the x3-axis the two lateral
faces meet at a right angle, and det D2U = F forces u_12 = sqrt(1 - G(x3)) on
the axis, so the wedge opening after normalization oscillates with the dyadic
structure of G.
"""

import math
from typing import List

import numpy as np
import structlog

from constructions.barrier import BarrierFunction, BarrierTerm, QuadraticTerm, radial_derivatives
from constructions.profiles import DyadicProfiles, counterexample_rhs, extended_profile, smooth_cutoff
from core.models import AffineMap, ArrayModel
from geometry.polytope import Polytope, polytope_from_halfspaces
from normalize.jets import a_mu_map
from solver.domains import ComputationalDomain, polygon_domain
from solver.fields import ScalarField

logger = structlog.get_logger(__name__)

TOP = 10.0
CUTOFF_CENTER = (0.0, 0.0, TOP)


def mu_k(k: int) -> float:
    """Opening of the normalized wedge at height 3/2^(k+2)"""
    if k < 1:
        raise ValueError("k must be a positive integer")
    return math.acos(math.sqrt(3.0) / 2.0 ** (k / 2.0 + 1.0)) / math.pi


class BilinearCutoffTerm(BarrierTerm):
    """weight * chi(|x - c|) x1 x2, chi one on B(c, 1/2) and zero off B(c, 1)"""

    kind = "bilinear_cutoff"

    def __init__(self, weight: float, center=CUTOFF_CENTER):
        self.weight = float(weight)
        self.center = np.asarray(center, dtype=float)
        self.chi = smooth_cutoff(0.5, 1.0)

    def evaluate(self, x):
        m, n = x.shape
        c, dc, d2c = radial_derivatives(self.chi, np.eye(n), x - self.center)
        q = x[:, 0] * x[:, 1]
        dq = np.zeros((m, n))
        dq[:, 0], dq[:, 1] = x[:, 1], x[:, 0]
        d2q = np.zeros((n, n))
        d2q[0, 1] = d2q[1, 0] = 1.0
        v = c * q
        g = dc * q[:, None] + c[:, None] * dq
        H = (
            d2c * q[:, None, None]
            + dc[:, :, None] * dq[:, None, :]
            + dq[:, :, None] * dc[:, None, :]
            + c[:, None, None] * d2q
        )
        return self.weight * v, self.weight * g, self.weight * H

    def describe(self):
        return {"kind": self.kind, "weight": self.weight, "center": self.center.tolist(), "cutoff": self.chi.label}


class CounterexampleBundle(ArrayModel):
    k_max: int
    lambda0: float
    polytope: Polytope
    domain: ComputationalDomain
    phi: ScalarField
    det_phi: ScalarField
    F: ScalarField
    F_tilde: ScalarField
    profiles: DyadicProfiles
    mu: List[float]


def counterexample_domain() -> Polytope:
    return polytope_from_halfspaces(
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-2.0, -2.0, 1.0], [0.0, 0.0, -1.0]],
        [0.0, 0.0, 0.0, -TOP],
    )


def counterexample_bundle(k_max: int = 6, lambda0: float = 0.02) -> CounterexampleBundle:
    """phi = |x|^2/2 + lambda0 chi x1 x2, F = det D2phi m(x3), F~ = det D2phi (m~(x3) + (x1 + x2) zeta(x3)/10)

    m and m~ follow G and G~ up to x3 = 1/2 and rise linearly to 1 at the top;
    zeta = clip(2 - 4 x3, 0, 1). F <= F~ <= det D2phi with equality at the vertices.
    """
    P = counterexample_domain()
    profiles = counterexample_rhs(k_max)
    m, m_tilde = extended_profile(k_max), extended_profile(k_max, tilde=True)
    phi = BarrierFunction([QuadraticTerm(np.eye(3), np.zeros(3)), BilinearCutoffTerm(lambda0)], label="phi", dim=3)

    def det_phi(x):
        return np.linalg.det(phi.hessian(x))

    def F(x):
        x = np.atleast_2d(x)
        return det_phi(x) * m(x[:, 2])

    def F_tilde(x):
        x = np.atleast_2d(x)
        zeta = np.clip(2.0 - 4.0 * x[:, 2], 0.0, 1.0)
        return det_phi(x) * (m_tilde(x[:, 2]) + (x[:, 0] + x[:, 1]) * zeta / 10.0)

    bundle = CounterexampleBundle(
        k_max=k_max,
        lambda0=lambda0,
        polytope=P,
        domain=polygon_domain(P),
        phi=ScalarField.from_callable(phi, label=f"|x|^2/2 + {lambda0:g}*chi*x1*x2"),
        det_phi=ScalarField.from_callable(det_phi, label="det D2phi"),
        F=ScalarField.from_callable(F, label=f"det D2phi * G(x3), k_max={k_max}", beta=1.0),
        F_tilde=ScalarField.from_callable(F_tilde, label=f"det D2phi * G~(x3), k_max={k_max}", beta=1.0),
        profiles=profiles,
        mu=[mu_k(k) for k in range(1, k_max + 1)],
    )
    logger.info("Counterexample bundle built", k_max=k_max, lambda0=lambda0, mu=bundle.mu)
    return bundle


class RescaledWindow(ArrayModel):
    """x in V_mu x R  ->  c + A_mu x / 2^(k+4), values scaled by 2^(2k+8)"""

    k: int
    mu: float
    center: List[float]
    normalizing_map: AffineMap
    spatial_scale: float
    value_scale: float

    def to_domain(self, x) -> np.ndarray:
        return np.asarray(self.center) + self.spatial_scale * self.normalizing_map.apply(x)

    def pullback(self, U, value: float, gradient) -> ScalarField:
        """W(x) = scale * (U - l)(to_domain(x)), l the tangent plane of U at the center"""
        c = np.asarray(self.center)
        grad = np.asarray(gradient, dtype=float)

        def W(x):
            y = self.to_domain(x)
            return self.value_scale * (U(y) - value - (y - c) @ grad)

        return ScalarField.from_callable(W, label=f"W_{self.k}")


def rescaled_window(k: int) -> RescaledWindow:
    mu = mu_k(k)
    return RescaledWindow(
        k=k,
        mu=mu,
        center=[0.0, 0.0, 3.0 / 2.0 ** (k + 2)],
        normalizing_map=a_mu_map(mu, 3),
        spatial_scale=2.0 ** -(k + 4),
        value_scale=2.0 ** (2 * k + 8),
    )
