"""
Barrier functions as sums of terms with analytic gradients and Hessians
"""

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from constructions.profiles import Piecewise1D, smoothstep
from solver.fields import ScalarField

Evaluation = Tuple[np.ndarray, np.ndarray, np.ndarray]


def _points(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


class BarrierTerm:
    """One summand: vectorized (value, gradient, Hessian) on (m, n) points"""

    kind = "term"

    def evaluate(self, x: np.ndarray) -> Evaluation:
        raise NotImplementedError

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind}


class AffineTerm(BarrierTerm):
    kind = "affine"

    def __init__(self, value: float, gradient, base):
        self.value = float(value)
        self.gradient = np.asarray(gradient, dtype=float)
        self.base = np.asarray(base, dtype=float)

    def evaluate(self, x):
        m, n = x.shape
        v = self.value + (x - self.base) @ self.gradient
        return v, np.broadcast_to(self.gradient, (m, n)).copy(), np.zeros((m, n, n))

    def describe(self):
        return {"kind": self.kind, "value": self.value, "gradient": self.gradient.tolist(), "base": self.base.tolist()}


class QuadraticTerm(BarrierTerm):
    """1/2 (x - c)^T Q (x - c)"""

    kind = "quadratic"

    def __init__(self, Q, center):
        self.Q = np.asarray(Q, dtype=float)
        self.center = np.asarray(center, dtype=float)

    def evaluate(self, x):
        y = x - self.center
        Qy = y @ self.Q.T
        return 0.5 * np.sum(y * Qy, axis=1), Qy, np.broadcast_to(self.Q, (len(x),) + self.Q.shape).copy()

    def describe(self):
        return {"kind": self.kind, "Q": self.Q.tolist(), "center": self.center.tolist()}


class ProfileTerm(BarrierTerm):
    """g(psi) + shift with psi = C0 w.(x - p) - 1/2 (x - p)^T Q (x - p)"""

    kind = "profile"

    def __init__(self, profile: Piecewise1D, C0: float, direction, vertex, Q, shift: float = 0.0):
        self.profile = profile
        self.C0 = float(C0)
        self.direction = np.asarray(direction, dtype=float)
        self.vertex = np.asarray(vertex, dtype=float)
        self.Q = np.asarray(Q, dtype=float)
        self.shift = float(shift)

    def psi(self, x) -> Tuple[np.ndarray, np.ndarray]:
        y = x - self.vertex
        Qy = y @ self.Q.T
        return self.C0 * (y @ self.direction) - 0.5 * np.sum(y * Qy, axis=1), self.C0 * self.direction - Qy

    def evaluate(self, x):
        psi, dpsi = self.psi(x)
        g0, g1, g2 = (self.profile(psi, nu) for nu in range(3))
        H = g2[:, None, None] * dpsi[:, :, None] * dpsi[:, None, :] - g1[:, None, None] * self.Q
        return g0 + self.shift, g1[:, None] * dpsi, H

    def describe(self):
        return {
            "kind": self.kind,
            "profile": self.profile.label,
            "C0": self.C0,
            "direction": self.direction.tolist(),
            "vertex": self.vertex.tolist(),
            "Q": self.Q.tolist(),
            "shift": self.shift,
        }


def radial_derivatives(profile: Callable, A: np.ndarray, y: np.ndarray) -> Evaluation:
    """profile(|A y|) with derivatives; profile(s, nu) gives the nu-th derivative

    Near s = 0 the profile is taken to be flat to first order.
    """
    m, n = y.shape
    Ay = y @ A.T
    s = np.linalg.norm(Ay, axis=1)
    AtA = A.T @ A
    v = profile(s, 0)
    d1, d2 = profile(s, 1), profile(s, 2)
    grad = np.zeros((m, n))
    hess = np.broadcast_to(profile(np.zeros(1), 2)[0] * AtA, (m, n, n)).copy()
    away = s > 1e-14
    if np.any(away):
        ds = (Ay[away] @ A) / s[away, None]
        d2s = (AtA[None] - ds[:, :, None] * ds[:, None, :]) / s[away, None, None]
        grad[away] = d1[away, None] * ds
        hess[away] = d2[away, None, None] * ds[:, :, None] * ds[:, None, :] + d1[away, None, None] * d2s
    return v, grad, hess


class RadialTerm(BarrierTerm):
    """weight * h(|A (x - c)|)"""

    kind = "radial"

    def __init__(self, profile: Piecewise1D, A, center, weight: float = 1.0):
        self.profile = profile
        self.A = np.asarray(A, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self.weight = float(weight)

    def evaluate(self, x):
        v, g, H = radial_derivatives(self.profile, self.A, x - self.center)
        return self.weight * v, self.weight * g, self.weight * H

    def describe(self):
        return {
            "kind": self.kind,
            "profile": self.profile.label,
            "A": self.A.tolist(),
            "center": self.center.tolist(),
            "weight": self.weight,
        }


class CutoffTerm(BarrierTerm):
    """weight * chi(x) |x - c|^2, chi vanishing on B(p_i, r_in) and one off every B(p_i, r_out)"""

    kind = "cutoff"

    def __init__(self, points, r_in: float, r_out: float, center, weight: float):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.r_in, self.r_out = float(r_in), float(r_out)
        self.center = np.asarray(center, dtype=float)
        self.weight = float(weight)
        self.step = smoothstep(self.r_in, self.r_out)

    def chi(self, x) -> Evaluation:
        m, n = x.shape
        v = np.ones(m)
        g = np.zeros((m, n))
        H = np.zeros((m, n, n))
        eye = np.eye(n)
        for p in self.points:
            ci, gi, Hi = radial_derivatives(self.step, eye, x - p)
            # product rule for v * ci
            H = (
                ci[:, None, None] * H
                + v[:, None, None] * Hi
                + g[:, :, None] * gi[:, None, :]
                + gi[:, :, None] * g[:, None, :]
            )
            g = ci[:, None] * g + v[:, None] * gi
            v = v * ci
        return v, g, H

    def evaluate(self, x):
        n = x.shape[1]
        c, dc, d2c = self.chi(x)
        y = x - self.center
        q = np.sum(y * y, axis=1)
        dq = 2.0 * y
        v = c * q
        g = dc * q[:, None] + c[:, None] * dq
        H = (
            d2c * q[:, None, None]
            + dc[:, :, None] * dq[:, None, :]
            + dq[:, :, None] * dc[:, None, :]
            + 2.0 * c[:, None, None] * np.eye(n)
        )
        return self.weight * v, self.weight * g, self.weight * H

    def describe(self):
        return {
            "kind": self.kind,
            "points": self.points.tolist(),
            "r_in": self.r_in,
            "r_out": self.r_out,
            "center": self.center.tolist(),
            "weight": self.weight,
        }


class BarrierFunction:
    """Sum of barrier terms; evaluates value, gradient and Hessian together"""

    def __init__(self, terms: Sequence[BarrierTerm], label: str = "barrier", dim: Optional[int] = None):
        self.terms: List[BarrierTerm] = list(terms)
        self.label = label
        self.dim = dim

    def evaluate(self, points) -> Evaluation:
        x = _points(points)
        m, n = x.shape
        v, g, H = np.zeros(m), np.zeros((m, n)), np.zeros((m, n, n))
        for term in self.terms:
            tv, tg, tH = term.evaluate(x)
            v += tv
            g += tg
            H += tH
        return v, g, H

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)[0]

    def gradient(self, points) -> np.ndarray:
        return self.evaluate(points)[1]

    def hessian(self, points) -> np.ndarray:
        return self.evaluate(points)[2]

    def plus(self, *terms: BarrierTerm) -> "BarrierFunction":
        return BarrierFunction(self.terms + list(terms), self.label, self.dim)

    def describe(self) -> Dict[str, Any]:
        return {"label": self.label, "sum": [t.describe() for t in self.terms]}

    def as_field(self) -> ScalarField:
        return ScalarField.from_callable(self.__call__, label=self.label)


class DerivativeCheck(BaseModel):
    probes: int
    step: float
    gradient_error: float
    hessian_error: float = Field(..., description="99th percentile over probes")
    passed: bool


def fd_gradient(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float) -> np.ndarray:
    x = _points(x)
    m, n = x.shape
    out = np.empty((m, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        out[:, k] = (func(x + e) - func(x - e)) / (2 * step)
    return out


def fd_hessian(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Second-order central differences of a scalar function"""
    x = _points(x)
    m, n = x.shape
    out = np.empty((m, n, n))
    f0 = func(x)
    for k in range(n):
        ek = np.zeros(n)
        ek[k] = step
        out[:, k, k] = (func(x + ek) - 2 * f0 + func(x - ek)) / step**2
        for l in range(k + 1, n):
            el = np.zeros(n)
            el[l] = step
            mixed = (func(x + ek + el) - func(x + ek - el) - func(x - ek + el) + func(x - ek - el)) / (4 * step**2)
            out[:, k, l] = out[:, l, k] = mixed
    return out


def derivative_check(
    barrier: BarrierFunction, probes: np.ndarray, step: float = 1e-4, tol: float = 1e-6
) -> DerivativeCheck:
    """Analytic derivatives against central differences, relative to the local scale"""
    x = _points(probes)
    _, g, H = barrier.evaluate(x)
    g_fd = fd_gradient(barrier, x, step)
    H_fd = np.stack([fd_gradient(lambda y, k=k: barrier.gradient(y)[:, k], x, step) for k in range(x.shape[1])], axis=1)
    g_err = float(np.max(np.abs(g - g_fd) / (1.0 + np.abs(g))))
    per_probe = np.max(np.abs(H - H_fd) / (1.0 + np.abs(H)), axis=(1, 2))
    H_err = float(np.quantile(per_probe, 0.99))
    return DerivativeCheck(
        probes=len(x), step=step, gradient_error=g_err, hessian_error=H_err, passed=max(g_err, H_err) <= tol
    )
