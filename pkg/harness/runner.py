"""
Experiment engine

Builds the domain, solves the grid ladder, runs the requested analyses and
collects verdicts. Module errors end the run with a FAILED document carrying
the error code and context.
"""

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from functools import partial
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import structlog

from asymptotics.edge import edge_oracle_field
from constructions.counterexample import counterexample_domain
from core.config import VERSION, Settings, get_settings
from core.exceptions import MapolyError
from core.logging_config import log_experiment_result
from geometry.cones import TangentCone, cone_from_normals
from geometry.polytope import (
    Polytope,
    cross_polytope,
    polytope_from_halfspaces,
    polytope_from_vertices,
    standard_simplex,
    unit_cube,
)
from harness.analyses import ANALYSES, ExperimentContext
from harness.models import (
    DomainSpec,
    ExperimentConfig,
    ExperimentStatus,
    FieldSpec,
    GridReport,
    ResultDocument,
    Series,
    Verdict,
)
from harness.plots import emit_plot_data
from solver.dirichlet import solve_ladder, solve_truncated_cone
from solver.domains import ComputationalDomain, box_domain, polygon_domain, truncated_cone_domain, wedge_domain
from solver.fields import ScalarField
from solver.solution import DiscreteSolution

logger = structlog.get_logger(__name__)

LADDER_KINDS = frozenset({"refinement", "sandwich", "pin", "corner", "hessian-trend", "edge"})


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_polytope(spec: DomainSpec) -> Optional[Polytope]:
    if spec.kind != "polytope":
        return None
    named = {
        "cube": lambda: unit_cube(spec.dim),
        "cross": lambda: cross_polytope(spec.dim),
        "simplex": lambda: standard_simplex(spec.dim),
        "counterexample": counterexample_domain,
    }
    if spec.name is not None:
        return named[spec.name]()
    if spec.vertices is not None:
        return polytope_from_vertices(spec.vertices)
    return polytope_from_halfspaces(spec.normals, spec.offsets)


def build_domain(spec: DomainSpec) -> Tuple[ComputationalDomain, Optional[Polytope], Optional[TangentCone]]:
    if spec.kind == "polytope":
        P = build_polytope(spec)
        return polygon_domain(P), P, None
    if spec.kind == "box":
        return box_domain(spec.lower, spec.upper), None, None
    if spec.kind == "wedge":
        return wedge_domain(spec.mu, spec.x3_range, spec.radius), None, None
    cone = cone_from_normals(spec.normals)
    return truncated_cone_domain(cone, spec.radius), None, cone


def build_field(spec: Optional[FieldSpec], domain: Optional[DomainSpec] = None) -> Optional[ScalarField]:
    if spec is None:
        return None
    if spec.expression is not None:
        return ScalarField.from_expression(spec.expression, spec.params)
    if spec.preset == "half_square_norm":
        return ScalarField.half_square_norm()
    p = spec.params
    mu = p.get("mu", domain.mu if domain is not None else None)
    return edge_oracle_field(mu, p.get("c", 0.0), p.get("q", 0.0), p.get("half_length"))


def _grid_report(sol: DiscreteSolution) -> GridReport:
    return GridReport(
        h=sol.h,
        unknowns=int(len(sol.grid.interior)),
        iterations=sol.iterations,
        residual=sol.residual,
        convexity_violations=sol.convexity_violations,
        monotone_scheme_id=sol.monotone_scheme_id,
        pin_shift=sol.pin_shift,
        warnings=sol.warnings,
        elapsed_ms=sol.elapsed_ms,
    )


def _elapsed(start: float) -> float:
    return round((time.time() - start) * 1000, 2)


class ExperimentEngine:
    """Runs experiment configs; one engine may serve several worker threads"""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.active_experiments: Dict[str, datetime] = {}
        self._lock = threading.Lock()

    def run(self, config: ExperimentConfig, only: Optional[Iterable[str]] = None) -> ResultDocument:
        return self.execute(config, only)[0]

    def execute(
        self, config: ExperimentConfig, only: Optional[Iterable[str]] = None
    ) -> Tuple[ResultDocument, List[DiscreteSolution]]:
        """
        Run one experiment

        1. Builds the domain and the data fields
        2. Solves the grid ladder (or the truncated-cone problem)
        3. Runs the analyses, restricted to the kinds in ``only`` when given
        4. Returns the result document and the solutions
        """
        start_time = time.time()
        created_at = datetime.utcnow()
        kinds = set(only) if only is not None else None
        structlog.contextvars.bind_contextvars(experiment_id=config.id, start_time=start_time)
        with self._lock:
            self.active_experiments[config.id] = created_at
        base = dict(
            experiment_id=config.id,
            config_hash=config_hash(config),
            version=VERSION,
            config=config,
            created_at=created_at,
        )
        timings: Dict[str, float] = {}
        solver_reports: List[GridReport] = []

        try:
            settings = self.settings.merged(config.settings)
            base["settings"] = settings.model_dump()
            logger.info("Running experiment", grids=config.grids, analyses=[a.label for a in config.analyses])

            # Step 1: domain and data
            ctx = ExperimentContext(config=config, settings=settings)
            if config.domain is not None:
                ctx.domain, ctx.polytope, ctx.cone = build_domain(config.domain)
            ctx.f = build_field(config.f, config.domain)
            ctx.phi = build_field(config.phi, config.domain)
            ctx.exact = build_field(config.exact, config.domain)

            # Step 2: grid ladder
            step = time.time()
            if kinds is None or kinds & LADDER_KINDS:
                ctx.solutions = self._solve(ctx)
            solver_reports = [_grid_report(s) for s in ctx.solutions]
            timings["solve"] = _elapsed(step)
            logger.info("Ladder solved", levels=len(ctx.solutions))

            # Step 3: analyses
            analyses: Dict[str, object] = {}
            verdicts: List[Verdict] = []
            series: Dict[str, Series] = {}
            warnings: List[str] = [w for s in ctx.solutions for w in s.warnings]
            for req in config.analyses:
                if kinds is not None and req.kind not in kinds:
                    continue
                step = time.time()
                outcome = ANALYSES[req.kind](ctx, req)
                analyses[req.label] = outcome.output
                verdicts.extend(outcome.verdicts)
                series.update(outcome.series)
                warnings.extend(outcome.warnings)
                timings[f"analysis:{req.label}"] = _elapsed(step)
                logger.info("Analysis finished", analysis=req.label, verdicts=len(outcome.verdicts))

            timings["total"] = _elapsed(start_time)
            failed = sum(not v.passed for v in verdicts)
            log_experiment_result(config.id, ExperimentStatus.COMPLETED.value, len(verdicts), failed, timings["total"])
            result = ResultDocument(
                **base,
                status=ExperimentStatus.COMPLETED,
                solver_reports=solver_reports,
                analyses=analyses,
                verdicts=verdicts,
                series=series,
                warnings=warnings,
                timings_ms=timings,
                completed_at=datetime.utcnow(),
            )
            return result, ctx.solutions

        except MapolyError as e:
            timings["total"] = _elapsed(start_time)
            logger.error("Experiment failed", error_code=e.code, error=e.message, context=e.context, exc_info=True)
            log_experiment_result(config.id, ExperimentStatus.FAILED.value, 0, 0, timings["total"])
            return self._failed(base, solver_reports, timings, e.code, e.message, e.context), []
        except Exception as e:
            timings["total"] = _elapsed(start_time)
            logger.error("Experiment failed", error=str(e), error_type=type(e).__name__, exc_info=True)
            log_experiment_result(config.id, ExperimentStatus.FAILED.value, 0, 0, timings["total"])
            return self._failed(base, solver_reports, timings, "INTERNAL_ERROR", str(e), {"type": type(e).__name__}), []
        finally:
            with self._lock:
                self.active_experiments.pop(config.id, None)
            structlog.contextvars.unbind_contextvars("experiment_id", "start_time")

    @staticmethod
    def _failed(base, solver_reports, timings, code: str, message: str, context) -> ResultDocument:
        return ResultDocument(
            **base,
            status=ExperimentStatus.FAILED,
            solver_reports=solver_reports,
            error_code=code,
            error_message=message,
            error_context=context,
            timings_ms=timings,
            completed_at=datetime.utcnow(),
        )

    @staticmethod
    def _solve(ctx: ExperimentContext) -> List[DiscreteSolution]:
        config = ctx.config
        if not config.grids:
            return []
        if config.cone_solve is not None:
            spec = config.cone_solve
            pin = (spec.pin_point, spec.pin_value) if spec.pin_point is not None else None
            sol = solve_truncated_cone(
                ctx.cone, config.domain.radius, spec.c, pin, outer=ctx.phi, h=config.grids[0], settings=ctx.settings
            )
            return [sol]
        return solve_ladder(ctx.domain, ctx.f, ctx.phi, config.grids, ctx.exact, ctx.settings).solutions

    def run_batch(
        self, configs: Sequence[ExperimentConfig], threads: int = 1, only: Optional[Iterable[str]] = None
    ) -> List[ResultDocument]:
        """Independent experiments, in input order; threads > 1 uses a worker pool"""
        run = partial(self.run, only=only)
        if threads <= 1 or len(configs) <= 1:
            return [run(c) for c in configs]
        logger.info("Running batch", experiments=len(configs), threads=threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, configs))


def run_experiment(config: ExperimentConfig, settings: Optional[Settings] = None) -> ResultDocument:
    return ExperimentEngine(settings).run(config)


def write_result(result: ResultDocument, out_dir: Union[str, Path]) -> Path:
    """config.json, result.json and one CSV per series"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(result.config.model_dump(mode="json"), indent=2))
    (out / "result.json").write_text(json.dumps(result.model_dump(mode="json"), indent=2))
    for kind in result.series:
        emit_plot_data(result, kind, out)
    logger.info("Result written", experiment_id=result.experiment_id, path=str(out), series=sorted(result.series))
    return out
