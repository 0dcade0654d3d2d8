"""
Core data models shared across the mapoly modules
"""

from enum import Enum
from typing import Annotated, List, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    WithJsonSchema,
    field_validator,
    model_validator,
)


def _as_float_array(value):
    return np.asarray(value, dtype=float)


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda a: np.asarray(a).tolist(), return_type=list),
    WithJsonSchema({"type": "array", "items": {}}),
]


class ArrayModel(BaseModel):
    """Immutable model allowed to hold numpy arrays"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class AffineMap(ArrayModel):
    """x -> linear @ x + shift"""

    linear: FloatArray = Field(..., description="Invertible n x n matrix")
    shift: Optional[FloatArray] = Field(None, description="Translation vector, zero if omitted")

    @model_validator(mode="after")
    def _check_invertible(self) -> "AffineMap":
        a = self.linear
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"linear part must be square, got shape {a.shape}")
        if self.shift is not None and self.shift.shape != (a.shape[0],):
            raise ValueError("shift has the wrong length")
        if abs(np.linalg.det(a)) <= 1e-14 * max(1.0, np.abs(a).max()) ** a.shape[0]:
            raise ValueError("linear part is singular")
        return self

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls(linear=np.eye(n))

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    @property
    def offset(self) -> np.ndarray:
        return np.zeros(self.dim) if self.shift is None else self.shift

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.linear))

    def apply(self, points) -> np.ndarray:
        """Map a point or an (m, n) array of points"""
        pts = np.asarray(points, dtype=float)
        return pts @ self.linear.T + self.offset

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.linear)
        return AffineMap(linear=inv, shift=-inv @ self.offset)

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """self after inner"""
        return AffineMap(
            linear=self.linear @ inner.linear,
            shift=self.linear @ inner.offset + self.offset,
        )


class SecondOrderJet(ArrayModel):
    """Value, gradient and Hessian of a function at a point"""

    base_point: FloatArray = Field(..., description="Point x0")
    value: float = Field(0.0, description="u(x0)")
    gradient: Optional[FloatArray] = Field(None, description="Du(x0), zero if omitted")
    hessian: FloatArray = Field(..., description="D2u(x0); NaN marks unknown entries")

    @model_validator(mode="after")
    def _check_shapes(self) -> "SecondOrderJet":
        n = self.base_point.shape[0]
        if self.hessian.shape != (n, n):
            raise ValueError(f"hessian must be {n}x{n}")
        if not np.allclose(self.hessian, self.hessian.T, atol=1e-10, equal_nan=True):
            raise ValueError("hessian is not symmetric")
        if self.gradient is not None and self.gradient.shape != (n,):
            raise ValueError("gradient has the wrong length")
        return self

    @classmethod
    def quadratic(cls, hessian, base_point=None) -> "SecondOrderJet":
        h = np.asarray(hessian, dtype=float)
        point = np.zeros(h.shape[0]) if base_point is None else base_point
        return cls(base_point=point, hessian=h)

    @property
    def dim(self) -> int:
        return self.base_point.shape[0]

    @property
    def grad(self) -> np.ndarray:
        return np.zeros(self.dim) if self.gradient is None else self.gradient

    def taylor(self, points) -> np.ndarray:
        """Second-order Taylor polynomial evaluated at points"""
        d = np.atleast_2d(np.asarray(points, dtype=float)) - self.base_point
        quad = 0.5 * np.einsum("ij,jk,ik->i", d, self.hessian, d)
        return self.value + d @ self.grad + quad


class PairAngle(BaseModel):
    facets: Tuple[int, int]
    angle: float


class AngleReport(BaseModel):
    """Max and min dihedral angle of a (normalized) cone"""

    theta_max: float = Field(..., description="Largest dihedral angle, radians")
    theta_min: float = Field(..., description="Smallest dihedral angle, radians")
    per_pair: List[PairAngle] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_order(self) -> "AngleReport":
        if not 0.0 < self.theta_min <= self.theta_max < np.pi:
            raise ValueError("expected 0 < theta_min <= theta_max < pi")
        return self


class MeshLevel(BaseModel):
    mesh_h: float
    triangles: int
    lambda1: float


class EigenResult(ArrayModel):
    """First Dirichlet eigenvalue of a spherical cross-section"""

    n: int
    lambda1: float = Field(..., gt=0)
    exponent_mu: float = Field(..., gt=0)
    mesh_size: float = Field(0.0, ge=0, description="Zero for closed-form results")
    estimated_error: float = Field(0.0, ge=0)
    lambda2: Optional[float] = None
    lambda2_gt_3: Optional[bool] = None
    ladder: List[MeshLevel] = Field(default_factory=list)
    nodes: Optional[FloatArray] = Field(None, exclude=True, description="Mesh nodes of the finest level")
    eigenfunction: Optional[FloatArray] = Field(None, exclude=True, description="First eigenfunction at the nodes")

    @model_validator(mode="after")
    def _check_relation(self) -> "EigenResult":
        mu = self.exponent_mu
        if abs(mu * (mu + self.n - 2) - self.lambda1) > 1e-9 * max(1.0, self.lambda1):
            raise ValueError("exponent does not satisfy mu(mu+n-2) = lambda1")
        return self


class GapReport(BaseModel):
    gap: float
    liouville_applicable: bool
    eigen: EigenResult


class ProbeEstimate(BaseModel):
    """Finite-difference estimate of one Hessian entry"""

    value: float
    order: int = Field(..., description="Consistency order of the stencil used")
    stencil: str
    node: List[float]


class ResidualReport(BaseModel):
    max_residual: float
    convexity_violations: int
    grid_convergence_rate: Optional[float] = None
    refinement: List[Tuple[float, float]] = Field(default_factory=list, description="(h, error) pairs")


class DichotomyClass(str, Enum):
    """Corner behaviour of the solution"""

    EQUALS_SUBSOLUTION = "EqualsSubsolution"
    PLUS_ROOT_BRANCH = "PlusRootBranch"
    NOT_C2 = "NotC2"
    INCONCLUSIVE = "Inconclusive"


class DirectionSeries(BaseModel):
    direction_id: int
    angle: float
    radii: List[float]
    estimates: List[float]
    extrapolated: float
    order: Optional[float] = None


class DichotomyVerdict(BaseModel):
    classification: DichotomyClass
    estimated_u12: float
    direction_spread: float
    small_root: float
    big_root: float
    tau_c2: float
    tau_root: float
    per_direction: List[DirectionSeries] = Field(default_factory=list)


class ExpansionFit(BaseModel):
    """Fitted c(x3) r'^(1/mu) sin(theta'/mu) along an edge"""

    exponent: float = Field(..., description="1/mu")
    x3_samples: List[float]
    coefficient_c: List[float]
    quadratic_part: SecondOrderJet
    residual_decay_rate: float
    decay_radii: List[float] = Field(default_factory=list)
    decay_residuals: List[float] = Field(default_factory=list)
    fit_window: Tuple[float, float]
    valid: bool = Field(..., description="Decay rate exceeds the exponent")

    @field_validator("coefficient_c")
    @classmethod
    def _finite(cls, values: List[float]) -> List[float]:
        if not all(np.isfinite(values)):
            raise ValueError("non-finite coefficient")
        return values


class InterpolationBounds(BaseModel):
    sup_bound: float
    holder_half_bound: float
