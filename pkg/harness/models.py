"""
Experiment configurations and result documents
"""

import math
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.config import Settings
from core.exceptions import ExpressionError
from core.expressions import compile_expression

AnalysisKind = Literal[
    "refinement",
    "sandwich",
    "pin",
    "corner",
    "hessian-trend",
    "comparison",
    "eigen",
    "edge",
    "geometry",
    "conditions",
    "subsolution",
    "barrier",
    "counterexample",
    "interpolation",
]

FIELD_PRESETS = ("half_square_norm", "edge_mode")


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; arrays become lists and non-finite floats become None"""
    if isinstance(value, BaseModel):
        value = value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if value is None or isinstance(value, (bool, int, str)):
        return value
    return str(value)


class ExperimentStatus(str, Enum):
    """Experiment processing status"""

    COMPLETED = "completed"
    FAILED = "failed"


class FieldSpec(BaseModel):
    """Closed-form expression or named field; a bare string is read as an expression"""

    model_config = ConfigDict(extra="forbid")

    expression: Optional[str] = Field(None, description="Expression in x1..x3")
    preset: Optional[Literal["half_square_norm", "edge_mode"]] = Field(None, description="Named field")
    params: Dict[str, float] = Field(default_factory=dict, description="Named parameters")

    @model_validator(mode="before")
    @classmethod
    def _from_string(cls, data: Any) -> Any:
        if isinstance(data, str):
            return {"expression": data}
        if isinstance(data, (int, float)):
            return {"expression": repr(float(data))}
        return data

    @model_validator(mode="after")
    def _check(self) -> "FieldSpec":
        if (self.expression is None) == (self.preset is None):
            raise ValueError("give exactly one of expression and preset")
        if self.expression is not None:
            try:
                compile_expression(self.expression, self.params)
            except ExpressionError as e:
                raise ValueError(e.message) from e
        return self


class DomainSpec(BaseModel):
    """Where the problem lives"""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["polytope", "box", "wedge", "truncated_cone"]
    name: Optional[Literal["cube", "cross", "simplex", "counterexample"]] = Field(
        None, description="Named polytope; cube of dimension 2 is the unit square"
    )
    dim: int = Field(2, ge=2, le=3)
    vertices: Optional[List[List[float]]] = None
    normals: Optional[List[List[float]]] = Field(None, description="Inward normals of half-spaces or cone facets")
    offsets: Optional[List[float]] = None
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    mu: Optional[float] = Field(None, description="Wedge opening in units of pi")
    x3_range: Tuple[float, float] = (-2.0, 2.0)
    radius: float = Field(1.0, gt=0, description="Wedge cylinder or cone truncation radius")

    @model_validator(mode="after")
    def _check(self) -> "DomainSpec":
        if self.kind == "polytope" and self.name is None and self.vertices is None and self.normals is None:
            raise ValueError("polytope domain needs a name, vertices or half-spaces")
        if self.kind == "box" and (self.lower is None or self.upper is None):
            raise ValueError("box domain needs lower and upper")
        if self.kind == "wedge" and self.mu is None:
            raise ValueError("wedge domain needs mu")
        if self.kind == "truncated_cone" and self.normals is None:
            raise ValueError("truncated cone needs facet normals")
        return self


class ConeSolveSpec(BaseModel):
    """det D2v = c on a truncated cone, optionally pinned at p0"""

    c: float = Field(..., gt=0)
    pin_point: Optional[List[float]] = None
    pin_value: Optional[float] = Field(None, lt=0.5)

    @model_validator(mode="after")
    def _check(self) -> "ConeSolveSpec":
        if (self.pin_point is None) != (self.pin_value is None):
            raise ValueError("pin needs both a point and a value")
        return self


class AnalysisRequest(BaseModel):
    """One step of the analysis pipeline"""

    kind: AnalysisKind
    name: Optional[str] = Field(None, description="Label used in verdict names; defaults to the kind")
    params: Dict[str, Any] = Field(default_factory=dict)
    expect: Dict[str, Any] = Field(default_factory=dict, description="Expected outcomes the verdicts compare against")

    @property
    def label(self) -> str:
        return self.name or self.kind


class ExperimentConfig(BaseModel):
    """Declarative experiment: domain, data, grid ladder, analyses and thresholds"""

    model_config = ConfigDict(extra="forbid")

    id: str = Field(..., pattern=r"^[a-z0-9][a-z0-9-]*$", description="Experiment identifier")
    description: str = ""
    slow: bool = Field(False, description="Acceptance-scale run")
    domain: Optional[DomainSpec] = None
    f: Optional[FieldSpec] = Field(None, description="Right-hand side")
    phi: Optional[FieldSpec] = Field(None, description="Boundary data")
    exact: Optional[FieldSpec] = Field(None, description="Known solution for error measurement")
    grids: List[float] = Field(default_factory=list, description="Grid spacings of the refinement ladder")
    cone_solve: Optional[ConeSolveSpec] = None
    analyses: List[AnalysisRequest] = Field(default_factory=list)
    thresholds: Dict[str, float] = Field(default_factory=dict)
    settings: Dict[str, Any] = Field(default_factory=dict, description="Overrides of the runtime settings")

    @field_validator("grids")
    @classmethod
    def _positive(cls, values: List[float]) -> List[float]:
        if any(h <= 0 for h in values):
            raise ValueError("grid spacings must be positive")
        return values

    @field_validator("settings")
    @classmethod
    def _known_settings(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        unknown = sorted(set(values) - set(Settings.model_fields))
        if unknown:
            raise ValueError(f"unknown settings: {', '.join(unknown)}")
        Settings(**values)
        return values

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.grids and self.domain is None:
            raise ValueError("a grid ladder needs a domain")
        if self.cone_solve is not None:
            if self.domain is None or self.domain.kind != "truncated_cone":
                raise ValueError("cone_solve needs a truncated_cone domain")
            if len(self.grids) != 1:
                raise ValueError("cone_solve runs on exactly one grid")
        elif self.grids and (self.f is None or self.phi is None):
            raise ValueError("a grid ladder needs f and phi")
        return self


class GridReport(BaseModel):
    """Solver report for one rung of the ladder"""

    h: float
    unknowns: int
    iterations: int
    residual: float
    convexity_violations: int
    monotone_scheme_id: str
    pin_shift: Optional[float] = None
    warnings: List[str] = Field(default_factory=list)
    elapsed_ms: float


class Verdict(BaseModel):
    """Pass/fail outcome of one check"""

    name: str
    passed: bool
    value: Any = None
    expected: Any = None

    @field_validator("value", "expected", mode="before")
    @classmethod
    def _plain(cls, v: Any) -> Any:
        return to_jsonable(v)


class Series(BaseModel):
    """Table for external plotting"""

    columns: List[str]
    rows: List[List[Optional[float]]] = Field(..., description="None marks a missing entry")


class ResultDocument(BaseModel):
    """Everything one experiment produced"""

    experiment_id: str
    config_hash: str = Field(..., description="SHA-256 of the canonical config JSON")
    version: str
    status: ExperimentStatus
    config: ExperimentConfig
    settings: Dict[str, Any] = Field(default_factory=dict, description="Effective settings")
    solver_reports: List[GridReport] = Field(default_factory=list)
    analyses: Dict[str, Any] = Field(default_factory=dict)
    verdicts: List[Verdict] = Field(default_factory=list)
    series: Dict[str, Series] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    error_code: Optional[str] = None
    error_message: Optional[str] = None
    error_context: Dict[str, Any] = Field(default_factory=dict)
    timings_ms: Dict[str, float] = Field(default_factory=dict)
    created_at: datetime
    completed_at: Optional[datetime] = None

    @field_validator("analyses", "error_context", mode="before")
    @classmethod
    def _plain(cls, v: Any) -> Any:
        return to_jsonable(v) if v is not None else {}

    @property
    def passed(self) -> bool:
        return self.status == ExperimentStatus.COMPLETED and all(v.passed for v in self.verdicts)

    @property
    def failed_verdicts(self) -> List[Verdict]:
        return [v for v in self.verdicts if not v.passed]
