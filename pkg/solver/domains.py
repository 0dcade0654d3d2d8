"""
Computational domains: intersections of half-spaces with an optional ball or cylinder
"""

from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import Field, model_validator
from scipy.linalg import null_space
from scipy.optimize import linprog

from core.exceptions import DegenerateInput, OutOfDomain
from core.models import AffineMap, ArrayModel, FloatArray
from geometry.cones import TangentCone, v_mu_cone
from geometry.polytope import Polytope

DomainKind = Literal["polygon2d", "box3d", "polytope", "wedge3d", "truncated_cone"]


class Quadric(ArrayModel):
    """{x : |Q (x - center)| <= radius}; Q = I gives a ball, its first two rows a cylinder"""

    matrix: FloatArray
    center: FloatArray
    radius: float = Field(..., gt=0)

    def level(self, points) -> np.ndarray:
        d = (np.atleast_2d(points) - self.center) @ self.matrix.T
        return self.radius - np.linalg.norm(d, axis=1)


class ComputationalDomain(ArrayModel):
    """Convex set {normals @ x >= offsets} cap quadric"""

    kind: DomainKind
    normals: FloatArray = Field(..., description="(F, n) unit inward normals")
    offsets: FloatArray
    quadric: Optional[Quadric] = None
    labels: List[str] = Field(default_factory=list, description="Boundary label per half-space")
    affine_precompose: Optional[AffineMap] = Field(
        None, description="x = S y + t; solving happens in the y variables"
    )

    @model_validator(mode="after")
    def _check(self) -> "ComputationalDomain":
        if self.normals.ndim != 2 or self.normals.shape[0] != self.offsets.shape[0]:
            raise ValueError("normals and offsets disagree")
        if self.labels and len(self.labels) != len(self.offsets):
            raise ValueError("one label per half-space")
        return self

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def slack(self, points) -> np.ndarray:
        """Distance-like margin to each boundary piece, quadric last"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        parts = [pts @ self.normals.T - self.offsets]
        if self.quadric is not None:
            parts.append(self.quadric.level(pts)[:, None])
        return np.hstack(parts)

    def margin(self, points) -> np.ndarray:
        return self.slack(points).min(axis=1)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        return self.margin(points) >= -tol

    def boundary_label(self, points, tol: float = 1e-9) -> List[str]:
        slack = self.slack(points)
        names = (self.labels or [f"facet{i}" for i in range(len(self.offsets))]) + (
            ["outer"] if self.quadric is not None else []
        )
        out = []
        for row in slack:
            hits = [names[k] for k in np.flatnonzero(np.abs(row) <= tol)]
            out.append("+".join(hits) if hits else "interior")
        return out

    def ray_exit(self, points, direction) -> np.ndarray:
        """Largest t >= 0 with x + t d inside, for x inside"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.atleast_2d(np.asarray(direction, dtype=float))
        t = np.full(len(pts), np.inf)
        rate = d @ self.normals.T
        slack = pts @ self.normals.T - self.offsets
        with np.errstate(divide="ignore", invalid="ignore"):
            hit = np.where(rate < 0, np.maximum(slack, 0.0) / -rate, np.inf)
        t = np.minimum(t, hit.min(axis=1))
        if self.quadric is not None:
            q = self.quadric
            a = np.sum((d @ q.matrix.T) ** 2, axis=1)
            y = (pts - q.center) @ q.matrix.T
            b = np.sum(y * (d @ q.matrix.T), axis=1)
            c = np.minimum(np.sum(y**2, axis=1) - q.radius**2, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                root = np.where(a > 0, (-b + np.sqrt(np.maximum(b * b - a * c, 0.0))) / a, np.inf)
            t = np.minimum(t, root)
        return t

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        n = self.dim
        lo, hi = np.empty(n), np.empty(n)
        bounds = [(None, None)] * n
        if self.quadric is not None:
            q = self.quadric
            # a cylinder leaves its axis directions unbounded
            reach = q.radius * np.linalg.norm(np.linalg.pinv(q.matrix), axis=1)
            free = np.linalg.norm(null_space(q.matrix), axis=1) if q.matrix.shape[0] < n else np.zeros(n)
            bounds = [
                (q.center[k] - reach[k], q.center[k] + reach[k]) if free[k] <= 1e-12 else (None, None)
                for k in range(n)
            ]
        for k in range(n):
            for sign, store in ((1.0, lo), (-1.0, hi)):
                c = np.zeros(n)
                c[k] = sign
                a_ub = -self.normals if len(self.offsets) else None
                b_ub = -self.offsets if len(self.offsets) else None
                res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
                if res.status != 0:
                    raise DegenerateInput("domain is empty or unbounded", {"axis": k})
                store[k] = res.x[k]
        return lo, hi

    def to_solver_frame(self) -> "ComputationalDomain":
        """The same set in the y variables of affine_precompose"""
        if self.affine_precompose is None:
            return self
        S, t = self.affine_precompose.linear, self.affine_precompose.offset
        nu = self.normals @ S
        b = self.offsets - self.normals @ t
        length = np.linalg.norm(nu, axis=1)
        quadric = None
        if self.quadric is not None:
            q = self.quadric
            quadric = Quadric(matrix=q.matrix @ S, center=np.linalg.solve(S, q.center - t), radius=q.radius)
        return ComputationalDomain(
            kind=self.kind,
            normals=nu / length[:, None],
            offsets=b / length,
            quadric=quadric,
            labels=self.labels,
        )


def polygon_domain(P: Polytope, kind: Optional[DomainKind] = None) -> ComputationalDomain:
    if kind is None:
        kind = "polygon2d" if P.dim == 2 else "polytope"
    return ComputationalDomain(
        kind=kind, normals=P.normals, offsets=P.offsets, labels=[f"facet{i}" for i in range(P.n_facets)]
    )


def box_domain(lower, upper) -> ComputationalDomain:
    lo, hi = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
    n = len(lo)
    eye = np.eye(n)
    return ComputationalDomain(
        kind="polygon2d" if n == 2 else "box3d",
        normals=np.vstack([eye, -eye]),
        offsets=np.concatenate([lo, -hi]),
        labels=[f"x{k + 1}=lo" for k in range(n)] + [f"x{k + 1}=hi" for k in range(n)],
    )


def wedge_domain(mu: float, x3_range: Tuple[float, float] = (-2.0, 2.0), radius: float = 1.0) -> ComputationalDomain:
    """V_mu x (a, b), cut by the cylinder r' <= radius"""
    cone = v_mu_cone(mu, 3)
    a, b = x3_range
    normals = np.vstack([cone.inward_normals, [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    return ComputationalDomain(
        kind="wedge3d",
        normals=normals,
        offsets=np.array([0.0, 0.0, a, -b]),
        quadric=Quadric(matrix=np.eye(3)[:2], center=np.zeros(3), radius=radius),
        labels=["lateral", "lateral", "bottom", "top"],
    )


def truncated_cone_domain(cone: TangentCone, R: float) -> ComputationalDomain:
    """(V - apex) cap B_R(0)"""
    if R <= 0:
        raise OutOfDomain("truncation radius must be positive")
    n = cone.dim
    return ComputationalDomain(
        kind="truncated_cone",
        normals=cone.inward_normals,
        offsets=np.zeros(cone.n_facets),
        quadric=Quadric(matrix=np.eye(n), center=np.zeros(n), radius=R),
        labels=["lateral"] * cone.n_facets,
    )
