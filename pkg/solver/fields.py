"""
Scalar fields for right-hand sides and boundary data
"""

from typing import Callable, Dict, Optional

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr

from core.exceptions import ExpressionError
from core.expressions import compile_expression


class ScalarField(BaseModel):
    """Vectorized point -> scalar map with Holder exponent and bound metadata"""

    label: str = Field(..., description="Expression text or a short name")
    expression: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    beta: float = Field(1.0, gt=0, le=1, description="Holder exponent of the field")
    inf: Optional[float] = Field(None, description="Known lower bound")
    sup: Optional[float] = Field(None, description="Known upper bound")

    _func: Optional[Callable] = PrivateAttr(default=None)

    def model_post_init(self, __context) -> None:
        if self.expression is not None and self._func is None:
            self._func = compile_expression(self.expression, self.params)

    @classmethod
    def from_expression(cls, text: str, params: Optional[Dict[str, float]] = None, **meta) -> "ScalarField":
        return cls(label=text, expression=text, params=params or {}, **meta)

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray], label: str, **meta) -> "ScalarField":
        field = cls(label=label, **meta)
        field._func = func
        return field

    @classmethod
    def constant(cls, value: float) -> "ScalarField":
        return cls.from_expression(repr(float(value)), inf=float(value), sup=float(value))

    @classmethod
    def half_square_norm(cls) -> "ScalarField":
        """|x|^2 / 2 in any dimension"""
        return cls.from_callable(lambda x: 0.5 * np.sum(np.atleast_2d(x) ** 2, axis=1), label="|x|^2/2")

    def __call__(self, points) -> np.ndarray:
        if self._func is None:
            raise ExpressionError(f"field {self.label!r} has no evaluator")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.asarray(self._func(pts), dtype=float)
        return np.broadcast_to(out, (pts.shape[0],)).copy()

    def bounds_on(self, points) -> tuple:
        values = self(points)
        lo = float(values.min()) if self.inf is None else self.inf
        hi = float(values.max()) if self.sup is None else self.sup
        return lo, hi

    def pullback(self, linear: np.ndarray, shift: np.ndarray, scale: float = 1.0) -> "ScalarField":
        """y -> scale * self(linear @ y + shift)"""
        a = np.asarray(linear, dtype=float)
        t = np.asarray(shift, dtype=float)
        return ScalarField.from_callable(
            lambda y: scale * self(np.atleast_2d(y) @ a.T + t),
            label=f"{scale:g}*({self.label}) o S",
            beta=self.beta,
        )

    def plus(self, other: "ScalarField", weight: float = 1.0) -> "ScalarField":
        return ScalarField.from_callable(
            lambda x: self(x) + weight * other(x),
            label=f"{self.label} + {weight:g}*({other.label})",
            beta=min(self.beta, other.beta),
        )


def as_field(value) -> ScalarField:
    """Accept a ScalarField, an expression string, a number or a callable"""
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, str):
        return ScalarField.from_expression(value)
    if isinstance(value, (int, float)):
        return ScalarField.constant(value)
    if callable(value):
        return ScalarField.from_callable(value, label=getattr(value, "__name__", "callable"))
    raise ExpressionError(f"cannot build a field from {type(value).__name__}")
