"""Shared fixtures"""

import numpy as np
import pytest
import structlog

from core.config import Settings
from geometry.polytope import cross_polytope, unit_cube


@pytest.fixture(autouse=True)
def _clear_log_context():
    structlog.contextvars.clear_contextvars()
    yield
    structlog.contextvars.clear_contextvars()


@pytest.fixture
def settings() -> Settings:
    return Settings()


@pytest.fixture
def square():
    return unit_cube(2)


@pytest.fixture
def cube():
    return unit_cube(3)


@pytest.fixture
def octahedron():
    return cross_polytope(3)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
