"""Expression grammar, runtime settings and the error hierarchy"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from core.config import Settings, get_settings
from core.exceptions import ExpressionError, MapolyError, OutOfDomain, SolverError
from core.expressions import compile_expression
from core.models import AffineMap, SecondOrderJet

PTS = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [-0.5, 0.25, 1.0]])


@pytest.mark.parametrize(
    "text, expected",
    [
        ("x1 + 2*x2 - x3", lambda p: p[:, 0] + 2 * p[:, 1] - p[:, 2]),
        ("x1^2 + x2^3", lambda p: p[:, 0] ** 2 + p[:, 1] ** 3),
        ("sqrt(abs(x3)) * pi", lambda p: np.sqrt(np.abs(p[:, 2])) * math.pi),
        ("max(x1, x2, 0.5)", lambda p: np.maximum(np.maximum(p[:, 0], p[:, 1]), 0.5)),
        ("pos(x1) + sign(x2)", lambda p: np.maximum(p[:, 0], 0.0) + np.sign(p[:, 1])),
        ("atan2(x2, 1) + e", lambda p: np.arctan2(p[:, 1], 1.0) + math.e),
        ("-x1", lambda p: -p[:, 0]),
    ],
)
def test_expression_values(text, expected):
    assert np.allclose(compile_expression(text)(PTS), expected(PTS))


def test_constant_expression_broadcasts():
    out = compile_expression("1.5")(PTS)
    assert out.shape == (3,)
    assert np.all(out == 1.5)


def test_parameters():
    f = compile_expression("k*x1*x2", {"k": 0.5})
    assert f(PTS)[1] == pytest.approx(1.0)
    assert f.variables == ["x1", "x2"]


@pytest.mark.parametrize(
    "text, params",
    [
        ("y + 1", None),
        ("foo(x1)", None),
        ("x1 +", None),
        ("x1 if x2 else x3", None),
        ("x1 % 2", None),
        ("k*x1", {"pi": 1.0}),
        ("x1.real", None),
    ],
)
def test_rejected_expressions(text, params):
    with pytest.raises(ExpressionError):
        compile_expression(text, params)


def test_variable_beyond_point_dimension():
    with pytest.raises(ExpressionError):
        compile_expression("x3")(np.zeros((2, 2)))


def test_min_needs_two_arguments():
    with pytest.raises(ExpressionError):
        compile_expression("min(x1)")(PTS)


def test_settings_defaults():
    s = Settings()
    assert s.grid_h == pytest.approx(1.0 / 32)
    assert s.scheme_width == 3
    assert s.max_probes == 64**3
    assert s.eps0_variant == "angle"


def test_settings_merge_ignores_none():
    s = Settings()
    merged = s.merged({"grid_h": 0.125, "threads": None})
    assert merged.grid_h == 0.125
    assert merged.threads == 1
    assert s.merged({}) is s
    with pytest.raises(ValidationError):
        s.merged({"grid_h": -1.0})


def test_settings_are_frozen():
    with pytest.raises(ValidationError):
        Settings().grid_h = 0.5


def test_settings_from_environment(monkeypatch):
    get_settings.cache_clear()
    monkeypatch.setenv("MAPOLY_SCHEME_WIDTH", "2")
    monkeypatch.setenv("MAPOLY_EPS0_VARIANT", "gap")
    try:
        s = get_settings()
        assert s.scheme_width == 2
        assert s.eps0_variant == "gap"
    finally:
        get_settings.cache_clear()


def test_error_payload():
    err = OutOfDomain("point lies outside the grid", {"point": [1.0, 2.0]})
    assert isinstance(err, SolverError) and isinstance(err, MapolyError)
    assert err.to_dict() == {
        "code": "OUT_OF_DOMAIN",
        "message": "point lies outside the grid",
        "context": {"point": [1.0, 2.0]},
    }
    assert MapolyError("bare").context == {}


def test_affine_map_inverse_and_compose(rng):
    S = AffineMap(linear=[[2.0, 1.0], [0.0, 1.0]], shift=[1.0, -1.0])
    x = rng.normal(size=(5, 2))
    assert np.allclose(S.inverse().apply(S.apply(x)), x)
    assert np.allclose(S.compose(S.inverse()).apply(x), x)
    assert S.determinant == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        AffineMap(linear=[[1.0, 2.0], [2.0, 4.0]])


def test_jet_validation():
    jet = SecondOrderJet.quadratic([[2.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    assert jet.taylor([[2.0, 1.0]])[0] == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        SecondOrderJet.quadratic([[1.0, 0.5], [0.0, 1.0]])
