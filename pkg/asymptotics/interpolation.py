"""
Interpolation bound for f in C^{1,alpha}([0,1]) from |f| <= A and ||f'||_{C^alpha} <= B
"""

from typing import Callable, Optional, Union

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel

from core.exceptions import HypothesisViolated
from core.models import InterpolationBounds


def interpolation_bound(A: float, B: float, alpha: float) -> InterpolationBounds:
    """sup|f'| <= 6 A^(a/(1+a)) B^(1/(1+a)); [f']_(a/2) <= (12 B^(1/(1+a)) + B) A^(a/(2(1+a)))"""
    if not 0 < alpha <= 1:
        raise HypothesisViolated("alpha must lie in (0, 1]", {"alpha": alpha})
    if A <= 0 or B <= 0:
        raise HypothesisViolated("A and B must be positive", {"A": A, "B": B})
    if A > B:
        raise HypothesisViolated("the bound needs A <= B", {"A": A, "B": B})
    sup_bound = 6.0 * A ** (alpha / (1 + alpha)) * B ** (1 / (1 + alpha))
    holder = (12.0 * B ** (1 / (1 + alpha)) + B) * A ** (alpha / (2 * (1 + alpha)))
    return InterpolationBounds(sup_bound=sup_bound, holder_half_bound=holder)


class InterpolationQuantities(BaseModel):
    """Sampled norms of f on [0, 1]"""

    A: float
    B: float
    derivative_sup: float
    derivative_holder_half: float
    samples: int


def _holder_seminorm(x: np.ndarray, g: np.ndarray, exponent: float) -> float:
    dx = np.abs(x[:, None] - x[None, :])
    dg = np.abs(g[:, None] - g[None, :])
    off = dx > 0
    return float(np.max(dg[off] / dx[off] ** exponent))


def measure_interpolation_quantities(
    f: Union[Polynomial, Callable[[np.ndarray], np.ndarray]],
    alpha: float,
    samples: int = 801,
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> InterpolationQuantities:
    """A = sup|f|, B = sup|f'| + [f']_alpha, and the two quantities the bound controls"""
    x = np.linspace(0.0, 1.0, samples)
    values = np.asarray(f(x), dtype=float)
    if derivative is None:
        derivative = f.deriv() if isinstance(f, Polynomial) else (lambda t: np.gradient(np.asarray(f(t), dtype=float), t))
    d = np.asarray(derivative(x), dtype=float)
    sup_d = float(np.max(np.abs(d)))
    return InterpolationQuantities(
        A=float(np.max(np.abs(values))),
        B=sup_d + _holder_seminorm(x, d, alpha),
        derivative_sup=sup_d,
        derivative_holder_half=_holder_seminorm(x, d, alpha / 2.0),
        samples=samples,
    )


class InterpolationCheck(BaseModel):
    quantities: InterpolationQuantities
    bounds: InterpolationBounds
    passed: bool


def check_interpolation(f, alpha: float, samples: int = 801) -> InterpolationCheck:
    """Measured sup|f'| and [f']_(alpha/2) against the bound; B is raised to A when smaller"""
    q = measure_interpolation_quantities(f, alpha, samples)
    bounds = interpolation_bound(q.A, max(q.A, q.B), alpha)
    passed = q.derivative_sup <= bounds.sup_bound and q.derivative_holder_half <= bounds.holder_half_bound
    return InterpolationCheck(quantities=q, bounds=bounds, passed=passed)


def polynomial_family(count: int = 100, max_degree: int = 5, seed: int = 0):
    """Random polynomials on [0, 1] of degree 1..max_degree with unit-scale coefficients"""
    rng = np.random.default_rng(seed)
    family = []
    for k in range(count):
        degree = 1 + k % max_degree
        coef = rng.uniform(-1.0, 1.0, degree + 1)
        scale = 10.0 ** rng.uniform(-2, 1)
        family.append(Polynomial(scale * coef))
    return family
