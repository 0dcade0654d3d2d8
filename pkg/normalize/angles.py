"""
Dihedral-angle functionals, the A-condition and epsilon0
"""

from typing import Callable, List, Literal, Optional, Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field

from core.config import get_settings
from core.exceptions import DegenerateCone, EmptySample, NotOnSkeleton, PointNotOnBoundary
from core.models import AngleReport, PairAngle, SecondOrderJet
from geometry.cones import TangentCone, tangent_cone
from geometry.polytope import Polytope
from normalize.jets import hessian_normalizer

logger = structlog.get_logger(__name__)

GapInput = Union[Sequence[float], Callable[[np.ndarray], float], None]


def dihedral_angles(cone: TangentCone) -> AngleReport:
    """Angles pi - arccos(nu_i . nu_j) over adjacent facet pairs"""
    if cone.n_facets < 2 or not cone.adjacent_pairs:
        raise DegenerateCone("cone needs two adjacent facets", {"facets": cone.n_facets})
    nu = cone.inward_normals / np.linalg.norm(cone.inward_normals, axis=1, keepdims=True)
    per_pair = []
    for i, j in cone.adjacent_pairs:
        c = float(np.clip(nu[i] @ nu[j], -1.0, 1.0))
        per_pair.append(PairAngle(facets=(i, j), angle=float(np.pi - np.arccos(c))))
    angles = [p.angle for p in per_pair]
    return AngleReport(theta_max=max(angles), theta_min=min(angles), per_pair=per_pair)


def normalized_cone(hessian, cone: TangentCone) -> TangentCone:
    """Image of the cone under T^-1, T = H^(-1/2)"""
    T = hessian_normalizer(hessian)
    return cone.linear_image(np.linalg.inv(T.linear))


def cone_at(P: Polytope, point) -> TangentCone:
    """Tangent cone at a point of the (n-2)-skeleton"""
    try:
        cone = tangent_cone(P, point)
    except PointNotOnBoundary as e:
        raise NotOnSkeleton(e.message, e.context) from e
    if cone.n_facets < 2:
        raise NotOnSkeleton("point lies in the relative interior of a facet", {"point": list(map(float, point))})
    return cone


def theta_functionals(jet: SecondOrderJet, P: Polytope) -> AngleReport:
    """Theta and theta of u at jet.base_point"""
    cone = cone_at(P, jet.base_point)
    return dihedral_angles(normalized_cone(jet.hessian, cone))


def satisfies_a_condition(theta_max: float, strong: bool = False) -> bool:
    settings = get_settings()
    if strong:
        return theta_max < np.pi / 2 - max(settings.tau_strict, settings.angle_tol)
    return theta_max <= np.pi / 2 + settings.angle_tol


def check_a_condition(jet: SecondOrderJet, P: Polytope, strong: bool = False) -> bool:
    report = theta_functionals(jet, P)
    return satisfies_a_condition(report.theta_max, strong)


def angle_of_quadratic_corner(b: float) -> float:
    """Theta of |x|^2/2 + b x1 x2 at a right-angled corner"""
    if not -1.0 < b < 1.0:
        raise ValueError("b must lie in (-1, 1) for a convex quadratic")
    return float(np.arccos(b))


class Epsilon0Report(BaseModel):
    angle_variant: float = Field(..., description="min (pi/2 - Theta) over the sample")
    gap_variant: Optional[float] = Field(None, description="Variant using det D2u - f off the (n-3)-skeleton")
    selected: float
    variant: Literal["angle", "gap"]
    worst_point: List[float]
    samples: int


def _face_dim(P: Polytope, point) -> int:
    active = P.active_facets(point)
    if len(active) == 0:
        return P.dim
    return P.dim - int(np.linalg.matrix_rank(P.normals[active], tol=1e-8))


def _gaps(jets: Sequence[SecondOrderJet], gaps: GapInput) -> Optional[np.ndarray]:
    if gaps is None:
        return None
    if callable(gaps):
        return np.array([float(gaps(j.base_point)) for j in jets])
    values = np.asarray(gaps, dtype=float)
    if values.shape != (len(jets),):
        raise EmptySample("one gap value is needed per jet", {"jets": len(jets), "gaps": int(values.size)})
    return values


def epsilon0_report(
    P: Polytope,
    jets: Sequence[SecondOrderJet],
    subsolution_gap: GapInput = None,
    variant: Optional[str] = None,
) -> Epsilon0Report:
    if not jets:
        raise EmptySample("epsilon0 needs at least one jet")
    variant = variant or get_settings().eps0_variant
    margins = np.array([np.pi / 2 - theta_functionals(j, P).theta_max for j in jets])
    gaps = _gaps(jets, subsolution_gap)

    gap_variant = None
    terms = margins
    if gaps is not None:
        low = np.array([_face_dim(P, j.base_point) <= P.dim - 3 for j in jets])
        terms = np.where(low, margins, np.maximum(gaps, margins))
        gap_variant = float(terms.min())
    elif variant == "gap":
        raise EmptySample("the gap variant needs subsolution gaps")

    chosen = terms if variant == "gap" else margins
    worst = int(np.argmin(chosen))
    report = Epsilon0Report(
        angle_variant=float(margins.min()),
        gap_variant=gap_variant,
        selected=float(chosen[worst]),
        variant=variant,
        worst_point=jets[worst].base_point.tolist(),
        samples=len(jets),
    )
    logger.debug("epsilon0 evaluated", variant=variant, value=report.selected, samples=len(jets))
    return report


def epsilon0(
    P: Polytope,
    jets: Sequence[SecondOrderJet],
    subsolution_gap: GapInput = None,
    variant: Optional[str] = None,
) -> float:
    return epsilon0_report(P, jets, subsolution_gap, variant).selected
