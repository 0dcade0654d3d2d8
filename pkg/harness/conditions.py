"""
Structured verdict on the global-regularity conditions (C1)-(C5)

C1  det D2phi = f on the (n-3)-skeleton
C2  phi satisfies the A-condition on the (n-2)-skeleton
C3  phi satisfies the strong A-condition there
C4  det D2u_ > f on the closed polytope, u_ the sub-solution
C5  u_ satisfies the strong A-condition on the (n-2)-skeleton
"""

from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field

from constructions.barrier import fd_gradient, fd_hessian
from constructions.sampling import interior_grid
from core.config import Settings, get_settings
from core.exceptions import IncompleteJets
from core.models import SecondOrderJet
from geometry.cones import sample_skeleton
from geometry.polytope import Polytope, is_simple
from normalize.angles import Epsilon0Report, epsilon0_report, satisfies_a_condition, theta_functionals
from solver.fields import ScalarField, as_field

logger = structlog.get_logger(__name__)

JetSource = Union[Sequence[SecondOrderJet], Callable[[np.ndarray], SecondOrderJet]]

SUBSOLUTION_GRID_CAP = 41


class ConditionVerdict(BaseModel):
    condition: str
    evaluated: bool = Field(..., description="False when the condition needs a sub-solution that was not given")
    passed: Optional[bool] = None
    worst_value: Optional[float] = None
    worst_point: Optional[List[float]] = None
    samples: int = 0
    note: str = ""


class ConditionReport(BaseModel):
    dim: int
    simple: bool
    conditions: Dict[str, ConditionVerdict]
    epsilon0: Optional[Epsilon0Report] = None
    notes: List[str] = Field(default_factory=list)

    def passed(self, condition: str) -> Optional[bool]:
        return self.conditions[condition].passed


def skeleton_points(P: Polytope, per_edge: Optional[int] = None, settings: Optional[Settings] = None):
    """Sampled points of the (n-2)-skeleton and the dimension of their smallest face"""
    settings = settings or get_settings()
    samples = sample_skeleton(P, P.dim - 2, per_edge or settings.edge_samples)
    return np.array([s.point for s in samples]), np.array([s.face_dim for s in samples])


def jets_from_field(phi, points, step: float = 1e-4) -> List[SecondOrderJet]:
    """Jets by central differences of an analytic field"""
    phi = as_field(phi)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    values = phi(pts)
    grads = fd_gradient(phi, pts, 1e-6)
    hessians = fd_hessian(phi, pts, step)
    return [
        SecondOrderJet(base_point=p, value=float(v), gradient=g, hessian=0.5 * (H + H.T))
        for p, v, g, H in zip(pts, values, grads, hessians)
    ]


def jets_from_hessian(hessian, points) -> List[SecondOrderJet]:
    return [SecondOrderJet.quadratic(hessian, p) for p in np.atleast_2d(np.asarray(points, dtype=float))]


def _match_jets(source: Optional[JetSource], points: np.ndarray, tol: float) -> List[SecondOrderJet]:
    if source is None:
        raise IncompleteJets("no jets supplied", {"samples": len(points)})
    if callable(source):
        return [source(p) for p in points]
    bases = np.array([j.base_point for j in source]) if len(source) else np.empty((0, points.shape[1]))
    matched, missing = [], []
    for p in points:
        if len(bases):
            d = np.linalg.norm(bases - p, axis=1)
            k = int(np.argmin(d))
            if d[k] <= tol:
                matched.append(source[k])
                continue
        missing.append(p.tolist())
    if missing:
        raise IncompleteJets(
            "jets missing at sampled skeleton points", {"missing": len(missing), "first": missing[0]}
        )
    return matched


def _theta_verdict(name: str, jets: Sequence[SecondOrderJet], P: Polytope, strong: bool) -> ConditionVerdict:
    thetas = np.array([theta_functionals(j, P).theta_max for j in jets])
    worst = int(np.argmax(thetas))
    return ConditionVerdict(
        condition=name,
        evaluated=True,
        passed=satisfies_a_condition(float(thetas[worst]), strong=strong),
        worst_value=float(thetas[worst]),
        worst_point=jets[worst].base_point.tolist(),
        samples=len(jets),
    )


def condition_report(
    P: Polytope,
    phi_jets: Optional[JetSource],
    f,
    subsolution=None,
    per_edge: Optional[int] = None,
    det_tol: float = 1e-6,
    settings: Optional[Settings] = None,
) -> ConditionReport:
    """Evaluate (C1)-(C5) on sampled skeleton points

    ``phi_jets`` is a list of jets covering every sampled point of the
    (n-2)-skeleton, or a callable point -> jet. ``subsolution`` needs
    ``hessian(points)``; without it C4 and C5 are reported as not evaluated.
    """
    settings = settings or get_settings()
    f: ScalarField = as_field(f)
    n = P.dim
    points, face_dims = skeleton_points(P, per_edge, settings)
    jets = _match_jets(phi_jets, points, 1e3 * settings.geom_tol * max(1.0, P.diameter()))
    simple = is_simple(P)
    notes: List[str] = []
    if not simple:
        notes.append("polytope is not simple: the A-condition must fail at some vertex")

    conditions: Dict[str, ConditionVerdict] = {}
    low = face_dims <= n - 3
    if np.any(low):
        idx = np.flatnonzero(low)
        dets = np.array([np.linalg.det(jets[i].hessian) for i in idx])
        fv = f(points[idx])
        excess = np.abs(dets - fv) - det_tol * np.maximum(1.0, np.abs(fv))
        worst = int(np.argmax(excess))
        conditions["C1"] = ConditionVerdict(
            condition="C1",
            evaluated=True,
            passed=bool(excess[worst] <= 0),
            worst_value=float(abs(dets[worst] - fv[worst])),
            worst_point=points[idx[worst]].tolist(),
            samples=len(idx),
        )
    else:
        conditions["C1"] = ConditionVerdict(
            condition="C1", evaluated=True, passed=True, note="the (n-3)-skeleton is empty"
        )

    conditions["C2"] = _theta_verdict("C2", jets, P, strong=False)
    conditions["C3"] = _theta_verdict("C3", jets, P, strong=True)

    gap = None
    if subsolution is None:
        for name in ("C4", "C5"):
            conditions[name] = ConditionVerdict(condition=name, evaluated=False, note="no sub-solution given")
    else:
        closure = np.vstack([interior_grid(P, settings.max_probes, cap=SUBSOLUTION_GRID_CAP), points])
        margin = np.linalg.det(subsolution.hessian(closure)) - f(closure)
        worst = int(np.argmin(margin))
        conditions["C4"] = ConditionVerdict(
            condition="C4",
            evaluated=True,
            passed=bool(margin[worst] > 0),
            worst_value=float(margin[worst]),
            worst_point=closure[worst].tolist(),
            samples=len(closure),
        )
        sub_hessians = subsolution.hessian(points)
        sub_jets = [SecondOrderJet(base_point=p, hessian=0.5 * (H + H.T)) for p, H in zip(points, sub_hessians)]
        conditions["C5"] = _theta_verdict("C5", sub_jets, P, strong=True)
        gap = margin[-len(points):]

    eps0 = epsilon0_report(P, jets, gap, "gap" if gap is not None else "angle")
    report = ConditionReport(dim=n, simple=simple, conditions=conditions, epsilon0=eps0, notes=notes)
    logger.info(
        "Conditions evaluated",
        dim=n,
        simple=simple,
        samples=len(points),
        verdicts={k: v.passed for k, v in conditions.items()},
        epsilon0=eps0.selected,
    )
    return report
