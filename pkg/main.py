#!/usr/bin/env python3
"""
mapoly API
HTTP surface over the experiment engine, the condition checker and the cone eigen-solver
"""

import time
from contextlib import asynccontextmanager
from typing import Any, Dict, List, Optional

import uvicorn
from fastapi import Depends, FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from core.config import VERSION, get_settings
from core.exceptions import ConfigError, MapolyError
from core.logging_config import RequestLoggingMiddleware, setup_logging
from geometry.cones import cone_from_normals
from harness.conditions import condition_report, jets_from_field, jets_from_hessian, skeleton_points
from harness.models import DomainSpec, FieldSpec, to_jsonable
from harness.presets import list_presets, load_preset, parse_config
from harness.runner import ExperimentEngine, build_field, build_polytope
from spectral.eigen import eigenvalue_gap_check

SERVICE = "mapoly API"

logger = setup_logging()

engine: Optional[ExperimentEngine] = None


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Create the experiment engine"""
    global engine
    try:
        logger.info("Starting mapoly API", version=VERSION)
        engine = ExperimentEngine(get_settings())
        yield
    except Exception as e:
        logger.error("Failed to initialize mapoly API", error=str(e), exc_info=True)
        raise
    finally:
        logger.info("mapoly API shutdown complete")


app = FastAPI(
    title=SERVICE,
    description="Numerical laboratory for det D2u = f on convex polytopes",
    version=VERSION,
    lifespan=lifespan,
)

app.add_middleware(RequestLoggingMiddleware)
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def get_engine() -> ExperimentEngine:
    global engine
    if engine is None:
        engine = ExperimentEngine(get_settings())
    return engine


class ExperimentRunRequest(BaseModel):
    preset: Optional[str] = Field(None, description="Shipped preset name")
    config: Optional[Dict[str, Any]] = Field(None, description="Inline experiment config")
    overrides: Dict[str, Any] = Field(default_factory=dict, description="Top-level config keys to replace")


class ConditionsRequest(BaseModel):
    polytope: DomainSpec
    phi_hessian: Optional[List[List[float]]] = Field(None, description="Constant Hessian of phi")
    phi: Optional[FieldSpec] = Field(None, description="Boundary data; jets by finite differences")
    f: FieldSpec = Field(default_factory=lambda: FieldSpec(expression="1"))
    per_edge: Optional[int] = Field(None, ge=2, description="Skeleton samples per edge")


class EigenRequest(BaseModel):
    normals: List[List[float]] = Field(..., description="Inward facet normals of the cone")
    mesh_h: Optional[float] = Field(None, gt=0)


@app.get("/")
async def root():
    return {"status": "ok", "service": SERVICE, "version": VERSION}


@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "service": SERVICE,
        "version": VERSION,
        "timestamp": time.time(),
        "active_experiments": len(engine.active_experiments) if engine else 0,
    }


@app.get("/api/v1/presets")
async def presets():
    return {"presets": [p.model_dump() for p in list_presets()]}


@app.post("/api/v1/experiments/run")
async def run_experiment(request: ExperimentRunRequest, runner: ExperimentEngine = Depends(get_engine)):
    """
    Run one experiment

    Exactly one of ``preset`` and ``config``. Module errors come back as a
    result document with status "failed"; invalid input is rejected with 422.
    """
    if (request.preset is None) == (request.config is None):
        raise ConfigError("give exactly one of preset and config")
    if request.preset is not None:
        config = load_preset(request.preset, request.overrides)
    else:
        config = parse_config(request.config, request.overrides)
    logger.info("Experiment requested", experiment_id=config.id)
    result = await run_in_threadpool(runner.run, config)
    return result.model_dump(mode="json")


@app.post("/api/v1/conditions")
async def check_conditions(request: ConditionsRequest):
    P = build_polytope(request.polytope)
    if P is None:
        raise ConfigError("conditions need a polytope domain", {"kind": request.polytope.kind})
    settings = get_settings()
    points = skeleton_points(P, request.per_edge, settings)[0]
    jets = None
    if request.phi_hessian is not None:
        jets = jets_from_hessian(request.phi_hessian, points)
    elif request.phi is not None:
        jets = jets_from_field(build_field(request.phi), points)
    report = await run_in_threadpool(
        condition_report, P, jets, build_field(request.f), None, request.per_edge, settings=settings
    )
    return report.model_dump(mode="json")


@app.post("/api/v1/eigen")
async def eigen(request: EigenRequest):
    cone = cone_from_normals(request.normals)
    gap = await run_in_threadpool(eigenvalue_gap_check, cone, request.mesh_h)
    body = gap.eigen.model_dump(mode="json")
    body.update(gap=gap.gap, liouville_applicable=gap.liouville_applicable)
    return body


@app.exception_handler(MapolyError)
async def mapoly_exception_handler(request: Request, exc: MapolyError):
    """Invalid input or a module error outside an experiment"""
    error_id = f"err_{int(time.time() * 1000000)}"
    logger.warning(
        "Request rejected",
        error_id=error_id,
        error_code=exc.code,
        error_message=exc.message,
        path=str(request.url.path),
    )
    return JSONResponse(
        status_code=422,
        content={
            "error": {
                "code": exc.code,
                "message": exc.message,
                "context": to_jsonable(exc.context),
                "error_id": error_id,
                "timestamp": time.time(),
            }
        },
    )


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """Global exception handler with structured logging"""
    error_id = f"err_{int(time.time() * 1000000)}"

    logger.error(
        "Unhandled exception",
        error_id=error_id,
        error_type=type(exc).__name__,
        error_message=str(exc),
        path=str(request.url.path),
        method=request.method,
        exc_info=True,
    )

    return JSONResponse(
        status_code=500,
        content={
            "error": {
                "code": "INTERNAL_ERROR",
                "message": "An unexpected error occurred",
                "error_id": error_id,
                "timestamp": time.time(),
            }
        },
    )


if __name__ == "__main__":
    uvicorn.run("main:app", host="0.0.0.0", port=8000, reload=True, log_level="info")
