"""
Finite-difference probes of discrete solutions and refinement reports
"""

import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from core.exceptions import OutOfDomain
from core.models import ProbeEstimate, ResidualReport
from solver.solution import DiscreteSolution


def _value(sol: DiscreteSolution, idx: np.ndarray) -> Optional[float]:
    shape = np.array(sol.grid.shape)
    if np.any(idx < 0) or np.any(idx >= shape):
        return None
    v = sol.values[np.ravel_multi_index(tuple(idx), sol.grid.shape)]
    return float(v) if np.isfinite(v) else None


def _pure(sol: DiscreteSolution, base: np.ndarray, e: np.ndarray, step: int) -> Tuple[float, int, str]:
    u0 = _value(sol, base)
    fwd, bwd = _value(sol, base + step * e), _value(sol, base - step * e)
    hh = (step * sol.h) ** 2
    if fwd is not None and bwd is not None:
        return (fwd - 2 * u0 + bwd) / hh, 2, "centered"
    for sign, name in ((1, "forward"), (-1, "backward")):
        u1, u2 = _value(sol, base + sign * step * e), _value(sol, base + 2 * sign * step * e)
        if u1 is not None and u2 is not None:
            return (u0 - 2 * u1 + u2) / hh, 1, name
    raise OutOfDomain("no pure second difference fits at this node", {"node": base.tolist()})


def _mixed(sol: DiscreteSolution, base: np.ndarray, ei: np.ndarray, ej: np.ndarray, step: int) -> Tuple[float, int, str]:
    hh = (step * sol.h) ** 2
    corners = {
        (a, b): _value(sol, base + step * (a * ei + b * ej)) for a in (1, -1) for b in (1, -1)
    }
    if all(v is not None for v in corners.values()):
        value = (corners[1, 1] - corners[1, -1] - corners[-1, 1] + corners[-1, -1]) / (4 * hh)
        return value, 2, "centered-4pt"
    u0 = _value(sol, base)
    for a in (1, -1):
        for b in (1, -1):
            ua, ub = _value(sol, base + step * a * ei), _value(sol, base + step * b * ej)
            if corners[a, b] is None or ua is None or ub is None:
                continue
            return a * b * (corners[a, b] - ua - ub + u0) / hh, 1, "one-sided"
    raise OutOfDomain("no mixed difference fits at this node", {"node": base.tolist()})


def hessian_probe(sol: DiscreteSolution, x, pair: Tuple[int, int], step: int = 1) -> ProbeEstimate:
    """Estimate u_ij at the node nearest x (grid coordinates, 0-based i, j)

    Centered stencils are second order; one-sided fallbacks near the
    boundary are first order. ``step`` widens the stencil to step * h.
    """
    flat = sol.grid.nearest(x)
    base = sol.grid.multi_index(np.array([flat]))[0]
    i, j = pair
    n = sol.dim
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"pair {pair} out of range for n = {n}")
    ei, ej = np.eye(n, dtype=int)[i], np.eye(n, dtype=int)[j]
    if i == j:
        value, order, stencil = _pure(sol, base, ei, step)
    else:
        value, order, stencil = _mixed(sol, base, ei, ej, step)
    node = sol.grid.h * (np.array(sol.grid.lower) + base)
    return ProbeEstimate(value=float(value), order=order, stencil=stencil, node=node.tolist())


def hessian_at(sol: DiscreteSolution, x, step: int = 1) -> np.ndarray:
    n = sol.dim
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            H[i, j] = H[j, i] = hessian_probe(sol, x, (i, j), step).value
    return H


def centered_hessians(sol: DiscreteSolution) -> Tuple[np.ndarray, np.ndarray]:
    """Centered Hessians at every node whose full stencil is inside; (points, (m, n, n))"""
    V = sol.value_grid()
    n = sol.dim
    h = sol.h
    core = tuple(slice(1, -1) for _ in range(n))
    H = np.zeros(V[core].shape + (n, n))

    def shifted(offset):
        return V[tuple(slice(1 + o, m - 1 + o) for o, m in zip(offset, V.shape))]

    for i in range(n):
        ei = np.eye(n, dtype=int)[i]
        H[..., i, i] = (shifted(ei) - 2 * V[core] + shifted(-ei)) / h**2
        for j in range(i + 1, n):
            ej = np.eye(n, dtype=int)[j]
            mixed = (shifted(ei + ej) - shifted(ei - ej) - shifted(ej - ei) + shifted(-ei - ej)) / (4 * h**2)
            H[..., i, j] = H[..., j, i] = mixed
    ok = np.all(np.isfinite(H), axis=(-2, -1))
    axes = [a[1:-1] for a in sol.grid.axes()]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m[ok] for m in mesh], axis=1)
    return pts, H[ok]


def max_hessian_eigenvalue(sol: DiscreteSolution) -> float:
    """Largest eigenvalue of the centered Hessian over the nodes where it is defined"""
    _, H = centered_hessians(sol)
    if len(H) == 0:
        raise OutOfDomain("no node carries a full centered stencil")
    return float(np.max(np.linalg.eigvalsh(H)[:, -1]))


def _physical_nodes(sol: DiscreteSolution) -> Tuple[np.ndarray, np.ndarray]:
    pts, vals = sol.nodes()
    if sol.frame is not None:
        pts = sol.frame.apply(pts)
    return pts, vals


def _interpolate_physical(sol: DiscreteSolution, points: np.ndarray) -> np.ndarray:
    pts = points if sol.frame is None else sol.frame.inverse().apply(points)
    return sol.interpolator()(pts)


class ComparisonReport(BaseModel):
    """Nodewise u1 - u2 over nodes of u1 where u2 is defined"""

    max_difference: float
    min_difference: float
    common_nodes: int
    worst_node: List[float]


def compare_solutions(u1: DiscreteSolution, u2: DiscreteSolution) -> ComparisonReport:
    pts, vals = _physical_nodes(u1)
    other = _interpolate_physical(u2, pts)
    ok = np.isfinite(other)
    if not np.any(ok):
        raise OutOfDomain("solutions share no nodes")
    diff = vals[ok] - other[ok]
    worst = int(np.argmax(diff))
    return ComparisonReport(
        max_difference=float(diff[worst]),
        min_difference=float(np.min(diff)),
        common_nodes=int(np.count_nonzero(ok)),
        worst_node=pts[ok][worst].tolist(),
    )


def observed_rate(refinement: Sequence[Tuple[float, float]]) -> Optional[float]:
    """log(e1/e2) / log(h1/h2) from the last two (h, error) pairs"""
    if len(refinement) < 2:
        return None
    (h1, e1), (h2, e2) = refinement[-2], refinement[-1]
    if e1 <= 0 or e2 <= 0 or h1 == h2:
        return None
    return math.log(e1 / e2) / math.log(h1 / h2)


def _errors(ladder: Sequence[DiscreteSolution], exact: Optional[Callable]) -> List[Tuple[float, float]]:
    if exact is not None:
        pairs = []
        for sol in ladder:
            pts, vals = _physical_nodes(sol)
            pairs.append((sol.h, float(np.max(np.abs(vals - np.asarray(exact(pts), dtype=float))))))
        return pairs
    # successive differences, coarse nodes against the next finer level
    pairs = []
    for coarse, fine in zip(ladder[:-1], ladder[1:]):
        pts, vals = _physical_nodes(coarse)
        other = _interpolate_physical(fine, pts)
        ok = np.isfinite(other)
        if np.any(ok):
            pairs.append((coarse.h, float(np.max(np.abs(vals[ok] - other[ok])))))
    return pairs


def residual_report(
    sol: DiscreteSolution,
    ladder: Optional[Sequence[DiscreteSolution]] = None,
    exact: Optional[Callable] = None,
) -> ResidualReport:
    """Scheme residual, convexity violations, and the observed order over a ladder"""
    refinement: List[Tuple[float, float]] = []
    if ladder:
        refinement = _errors(sorted(ladder, key=lambda s: -s.h), exact)
    return ResidualReport(
        max_residual=sol.residual,
        convexity_violations=sol.convexity_violations,
        grid_convergence_rate=observed_rate(refinement),
        refinement=refinement,
    )
