"""
Structured logging configuration for mapoly
"""

import logging
import os
import sys
import time
from typing import Any, Dict, Optional

import structlog
from fastapi import Request


def add_experiment_context(logger, method_name, event_dict):
    """Add the bound experiment id and preset to log events"""
    context = structlog.contextvars.get_contextvars()
    for key in ("experiment_id", "preset"):
        if key in context and key not in event_dict:
            event_dict[key] = context[key]
    return event_dict


def add_performance_metrics(logger, method_name, event_dict):
    """Add elapsed time since the bound start_time"""
    if "elapsed_ms" not in event_dict:
        start_time = structlog.contextvars.get_contextvars().get("start_time")
        if start_time:
            event_dict["elapsed_ms"] = round((time.time() - start_time) * 1000, 2)
    event_dict.pop("start_time", None)
    return event_dict


def setup_logging():
    """Configure structured logging for mapoly"""

    log_level = os.getenv("LOG_LEVEL", "INFO").upper()
    is_production = os.getenv("ENVIRONMENT", "development") == "production"

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            add_experiment_context,
            add_performance_metrics,
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="ISO"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer() if is_production
            else structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty()),
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        context_class=dict,
        cache_logger_on_first_use=True,
    )

    # stderr keeps CSV/JSON written to stdout by the CLI clean
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, log_level, logging.INFO),
        force=True,
    )

    logging.getLogger("uvicorn").setLevel(logging.WARNING)
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)
    logging.getLogger("fastapi").setLevel(logging.WARNING)

    return structlog.get_logger()


class RequestLoggingMiddleware:
    """Middleware to add request logging and timings"""

    def __init__(self, app):
        self.app = app
        self.logger = structlog.get_logger(__name__)

    async def __call__(self, scope, receive, send):
        if scope["type"] != "http":
            await self.app(scope, receive, send)
            return

        request = Request(scope)
        start_time = time.time()
        request_id = f"req_{int(start_time * 1000000)}"

        structlog.contextvars.bind_contextvars(request_id=request_id, start_time=start_time)
        self.logger.info("Request started", method=request.method, path=str(request.url.path))

        response_data: Dict[str, Any] = {}

        async def send_wrapper(message):
            if message["type"] == "http.response.start":
                response_data["status_code"] = message["status"]
            await send(message)

        try:
            await self.app(scope, receive, send_wrapper)
            self.logger.info("Request completed", status_code=response_data.get("status_code"))
        except Exception as e:
            self.logger.error("Request failed", error=str(e), error_type=type(e).__name__, exc_info=True)
            raise
        finally:
            structlog.contextvars.clear_contextvars()


def log_solver_progress(phase: str, iteration: int, residual: float, step: Optional[float] = None):
    """Log one nonlinear-solver iteration"""
    logger = structlog.get_logger("solver")
    logger.debug(
        "Solver iteration",
        phase=phase,
        iteration=iteration,
        residual=float(residual),
        step=step,
    )


def log_solver_result(kind: str, h: float, unknowns: int, iterations: int, residual: float, elapsed_ms: float):
    """Log a finished solve"""
    logger = structlog.get_logger("solver")
    logger.info(
        "Solve finished",
        domain=kind,
        h=h,
        unknowns=unknowns,
        iterations=iterations,
        residual=float(residual),
        elapsed_ms=elapsed_ms,
    )


def log_eigen_result(n: int, lambda1: float, mu: float, mesh_h: float, error: float):
    """Log an eigenvalue computation"""
    logger = structlog.get_logger("spectral")
    logger.info(
        "Eigenvalue computed",
        n=n,
        lambda1=float(lambda1),
        exponent_mu=float(mu),
        mesh_h=mesh_h,
        estimated_error=float(error),
    )


def log_verdict(name: str, passed: bool, value: Any = None, expected: Any = None):
    """Log a pass/fail verdict"""
    logger = structlog.get_logger("verdict")
    log_func = logger.info if passed else logger.warning
    log_func("Verdict", check=name, passed=passed, value=value, expected=expected)


def log_experiment_result(experiment_id: str, status: str, verdicts: int, failed: int, elapsed_ms: float):
    """Log a finished experiment"""
    logger = structlog.get_logger("harness")
    logger.info(
        "Experiment finished",
        experiment_id=experiment_id,
        status=status,
        verdicts=verdicts,
        failed=failed,
        elapsed_ms=elapsed_ms,
    )
