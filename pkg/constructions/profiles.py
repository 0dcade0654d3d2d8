"""
Exact piecewise-polynomial profiles: the convex bump, the h-profile,
radial ramps, cutoffs and the dyadic right-hand sides G, G~
"""

from typing import Iterator, List, Literal, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, Field, model_validator

from core.exceptions import ContinuityViolation

CONTINUITY_ORDER = {"C0": 0, "C1": 1, "C2": 2}


class Piecewise1D(BaseModel):
    """Polynomial pieces between sorted breakpoints

    Piece 0 covers (-inf, b0] and is written in powers of t - b0; piece i
    covers [b_{i-1}, b_i] in powers of t - b_{i-1}; the last piece runs to
    +inf. Declared continuity and convexity are verified on construction.
    """

    label: str = ""
    breakpoints: List[float]
    pieces: List[List[float]] = Field(..., description="Ascending coefficients per piece in the local variable")
    continuity_class: Literal["C0", "C1", "C2"] = "C0"
    convex: bool = False
    support: Optional[Tuple[float, float]] = Field(None, description="Interval the profile is meant for")

    @model_validator(mode="after")
    def _verify(self) -> "Piecewise1D":
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need one more piece than breakpoints")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must increase strictly")
        for nu in range(CONTINUITY_ORDER[self.continuity_class] + 1):
            jump, where = self.jump(nu)
            if jump is not None and jump > 0:
                raise ContinuityViolation(
                    f"derivative {nu} jumps at a breakpoint", {"label": self.label, "t": where, "jump": jump}
                )
        if self.convex:
            lo, hi = self.check_window()
            worst = self.min_derivative(2, lo, hi)
            if worst < -1e-12:
                raise ContinuityViolation("declared convex but the second derivative is negative", {"min": worst})
        return self

    def anchor(self, i: int) -> float:
        return self.breakpoints[0] if i == 0 else self.breakpoints[i - 1]

    def poly(self, i: int, nu: int = 0) -> Polynomial:
        p = Polynomial(self.pieces[i])
        return p.deriv(nu) if nu else p

    def __call__(self, t, nu: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.breakpoints), t, side="right")
        out = np.empty_like(t)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.poly(int(i), nu)(t[mask] - self.anchor(int(i)))
        return out

    def jump(self, nu: int) -> Tuple[Optional[float], Optional[float]]:
        """Largest jump of the nu-th derivative beyond 1e-12 relative, and where"""
        worst, where = None, None
        for i, b in enumerate(self.breakpoints):
            left = float(self.poly(i, nu)(b - self.anchor(i)))
            right = float(self.poly(i + 1, nu)(b - self.anchor(i + 1)))
            gap = abs(left - right) - 1e-12 * max(1.0, abs(left), abs(right))
            if worst is None or gap > worst:
                worst, where = gap, b
        return worst, where

    def check_window(self) -> Tuple[float, float]:
        if self.support is not None:
            return self.support
        if not self.breakpoints:
            return -1.0, 1.0
        span = max(self.breakpoints[-1] - self.breakpoints[0], 1.0)
        return self.breakpoints[0] - span, self.breakpoints[-1] + span

    def intervals(self, lo: float, hi: float) -> Iterator[Tuple[int, float, float]]:
        edges = [-np.inf] + list(self.breakpoints) + [np.inf]
        for i in range(len(self.pieces)):
            a, b = max(edges[i], lo), min(edges[i + 1], hi)
            if a <= b:
                yield i, a, b

    def _extreme(self, nu: int, lo: float, hi: float, pick) -> float:
        values = []
        for i, a, b in self.intervals(lo, hi):
            p = self.poly(i, nu)
            c = self.anchor(i)
            candidates = [a - c, b - c]
            if p.degree() >= 2:
                roots = p.deriv().roots()
                candidates += [r.real for r in roots if abs(r.imag) < 1e-12 and a - c <= r.real <= b - c]
            values.extend(float(p(x)) for x in candidates)
        return pick(values)

    def min_derivative(self, nu: int, lo: Optional[float] = None, hi: Optional[float] = None) -> float:
        window = self.check_window()
        return self._extreme(nu, window[0] if lo is None else lo, window[1] if hi is None else hi, min)

    def max_derivative(self, nu: int, lo: Optional[float] = None, hi: Optional[float] = None) -> float:
        window = self.check_window()
        return self._extreme(nu, window[0] if lo is None else lo, window[1] if hi is None else hi, max)

    def lipschitz_constant(self) -> float:
        lo, hi = self.check_window()
        return max(abs(self.min_derivative(1, lo, hi)), abs(self.max_derivative(1, lo, hi)))


def _shifted(p: Polynomial, scale: float) -> List[float]:
    """Coefficients of p(u / scale) in powers of u"""
    return [float(c) / scale**k for k, c in enumerate(p.coef)]


def corner_bump(eps0: float) -> Piecewise1D:
    """C^2 convex non-increasing g: -t up to eps0, constant -5 eps0/4 from 2 eps0

    On s = (t - eps0)/eps0 in [0, 1] the connector has g'' = 42 s (1 - s)^5 / eps0,
    which integrates to a slope change of exactly 1 and a drop of exactly eps0/4.
    The connector is of degree 8. The quintic meeting the same six C^2 end
    conditions has g'' proportional to s (1 - s)(21 - 30 s), negative for s > 0.7,
    and s (1 - s)^m puts the centroid of g'' at s = 1/4 only for m = 5.
    """
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    q2 = Polynomial([0.0, 42.0]) * Polynomial([1.0, -1.0]) ** 5
    connector = Polynomial([-1.0, -1.0]) + q2.integ(2)
    return Piecewise1D(
        label=f"bump(eps0={eps0:g})",
        breakpoints=[eps0, 2 * eps0],
        pieces=[[-eps0, -1.0], _shifted(eps0 * connector, eps0), [-1.25 * eps0]],
        continuity_class="C2",
        convex=True,
    )


def barrier_h_profile(delta: float) -> Piecewise1D:
    """h'' = min(1, 2(1 - t/d)^+) with h(0) = h'(0) = 0 and d = delta^3"""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    d = delta**3
    return Piecewise1D(
        label=f"h(delta={delta:g})",
        breakpoints=[d / 2, d],
        pieces=[
            [d * d / 8, d / 2, 0.5],
            [d * d / 8, d / 2, 0.5, -1.0 / (3 * d)],
            [11 * d * d / 24, 3 * d / 4],
        ],
        continuity_class="C2",
        convex=True,
        support=(0.0, 2.0),
    )


def radial_ramp(r0: float, width: float) -> Piecewise1D:
    """k = 0 up to r0, k'' rising linearly to 1 over width, then k'' = 1"""
    if r0 < 0 or width <= 0:
        raise ValueError("ramp needs r0 >= 0 and width > 0")
    return Piecewise1D(
        label=f"ramp(r0={r0:g}, w={width:g})",
        breakpoints=[r0, r0 + width],
        pieces=[[0.0], [0.0, 0.0, 0.0, 1.0 / (6 * width)], [width * width / 6, width / 2, 0.5]],
        continuity_class="C2",
        convex=True,
        support=(0.0, r0 + width + 10.0),
    )


def smoothstep(lo: float = 0.0, hi: float = 1.0) -> Piecewise1D:
    """C^2 step from 0 at lo to 1 at hi"""
    w = hi - lo
    return Piecewise1D(
        label=f"step[{lo:g},{hi:g}]",
        breakpoints=[lo, hi],
        pieces=[[0.0], [0.0, 0.0, 0.0, 10.0 / w**3, -15.0 / w**4, 6.0 / w**5], [1.0]],
        continuity_class="C2",
    )


# (breakpoints in s, value at the break and slope in s) for the unit-interval profiles
_G_UNIT = [(0.0, 1.0, -2.0), (0.25, 0.5, 0.0), (0.75, 0.5, -2.0)]
_G_TILDE_UNIT = [(0.0, 1.0, -1.0), (0.5, 0.5, 1.0), (0.75, 0.75, -3.0)]


def _dyadic(unit, k_max: int, label: str, tail_slope: Optional[float] = None) -> Piecewise1D:
    """1 - 2^-k + 2^-(k+1) g(2^(k+1) (t - 2^-(k+1))) on (2^-(k+1), 2^-k], k = 1..k_max

    Below 2^-(k_max+1) the profile continues as 1 - t.
    """
    breakpoints: List[float] = []
    pieces: List[List[float]] = [[1.0 - 2.0 ** -(k_max + 1), -1.0]]
    for k in range(k_max, 0, -1):
        left = 2.0 ** -(k + 1)
        base = 1.0 - 2.0**-k
        for s, g, slope in unit:
            breakpoints.append(left + s * left)
            pieces.append([base + left * g, slope])
    if tail_slope is not None:
        breakpoints.append(0.5)
        pieces.append([0.5, tail_slope])
    return Piecewise1D(
        label=label,
        breakpoints=breakpoints,
        pieces=pieces,
        continuity_class="C0",
        support=(0.0, 0.5) if tail_slope is None else (0.0, 10.0),
    )


class DyadicProfiles(BaseModel):
    G: Piecewise1D
    G_tilde: Piecewise1D
    k_max: int


def counterexample_rhs(k_max: int) -> DyadicProfiles:
    """G <= G~ on [0, 1/2], equal to 1 - 3/2^(k+2) at t = 3/2^(k+2)"""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    return DyadicProfiles(
        G=_dyadic(_G_UNIT, k_max, f"G(k_max={k_max})"),
        G_tilde=_dyadic(_G_TILDE_UNIT, k_max, f"G~(k_max={k_max})"),
        k_max=k_max,
    )


def extended_profile(k_max: int, tilde: bool = False) -> Piecewise1D:
    """G or G~ continued linearly from 1/2 at x3 = 1/2 to 1 at x3 = 10"""
    unit = _G_TILDE_UNIT if tilde else _G_UNIT
    return _dyadic(unit, k_max, f"m{'~' if tilde else ''}(k_max={k_max})", tail_slope=1.0 / 19.0)


def smooth_cutoff(r_in: float, r_out: float) -> Piecewise1D:
    """One up to r_in, zero from r_out, C^2 in between"""
    step = smoothstep(r_in, r_out)
    pieces = [[-c for c in piece] for piece in step.pieces]
    pieces = [[1.0 + p[0]] + p[1:] for p in pieces]
    return Piecewise1D(
        label=f"cutoff[{r_in:g},{r_out:g}]", breakpoints=step.breakpoints, pieces=pieces, continuity_class="C2"
    )
