"""Experiment configs, presets, the condition checker, plot data and the engine"""

import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from core.exceptions import ConfigError, IncompleteJets, PresetNotFound, SeriesMissing
from geometry.polytope import cross_polytope
from harness.conditions import condition_report, jets_from_hessian, skeleton_points
from harness.models import (
    DomainSpec,
    ExperimentConfig,
    ExperimentStatus,
    FieldSpec,
    ResultDocument,
    Series,
    Verdict,
    to_jsonable,
)
from harness.plots import emit_plot_data, refinement_series
from harness.presets import list_presets, load_config, load_preset, parse_config, preset_names
from harness.runner import ExperimentEngine, build_domain, build_field, config_hash, write_result
from core.models import ResidualReport

PRESETS = {
    "conic-pin",
    "counterexample-profiles",
    "cube-conditions",
    "cube-subsolution",
    "exact-quadratic",
    "interpolation-suite",
    "lune-eigen",
    "octant-eigen",
    "quarterplane-hbar",
    "quarterplane-liouville",
    "quarterspace-eigen",
    "corner-trichotomy-eps-neg",
    "corner-trichotomy-eps-pos",
    "corner-trichotomy-eps0",
    "square-conditions",
    "small-f-barrier-square",
    "wedge-perturbed",
    "wedge-unperturbed",
}

SQUARE = {"kind": "polytope", "name": "cube", "dim": 2}


@pytest.fixture
def engine(settings):
    return ExperimentEngine(settings)


def _config(**fields):
    return parse_config({"id": "probe", **fields})


def test_to_jsonable():
    data = {"a": np.array([1.0, np.inf]), "b": np.float64(2.5), "c": (1, None), 3: float("nan")}
    assert to_jsonable(data) == {"a": [1.0, None], "b": 2.5, "c": [1, None], "3": None}
    assert to_jsonable(ExperimentStatus.FAILED) == "failed"
    json.dumps(to_jsonable({"v": Verdict(name="x", passed=True, value=np.arange(3))}))


def test_field_spec_forms():
    assert FieldSpec.model_validate("x1 + 1").expression == "x1 + 1"
    assert FieldSpec.model_validate(0.75).expression == "0.75"
    assert FieldSpec(preset="half_square_norm").preset == "half_square_norm"
    with pytest.raises(ValidationError):
        FieldSpec.model_validate("x1 + y")
    with pytest.raises(ValidationError):
        FieldSpec(expression="x1", preset="half_square_norm")


def test_domain_spec_requirements():
    with pytest.raises(ValidationError):
        DomainSpec(kind="wedge")
    with pytest.raises(ValidationError):
        DomainSpec(kind="box", lower=[0, 0])
    with pytest.raises(ValidationError):
        DomainSpec(kind="polytope")


def test_config_validation():
    with pytest.raises(ConfigError) as info:
        _config(grids=[0.1])
    assert info.value.context["id"] == "probe"
    with pytest.raises(ConfigError):
        _config(domain=SQUARE, f="1", phi="1", grids=[-0.1])
    with pytest.raises(ConfigError):
        _config(settings={"no_such_knob": 1})
    with pytest.raises(ConfigError):
        _config(domain=SQUARE, grids=[0.1], cone_solve={"c": 1.0})
    with pytest.raises(ConfigError):
        parse_config({"id": "Bad Id"})
    config = _config(domain=SQUARE, f="1", phi={"preset": "half_square_norm"}, grids=[0.25], settings={"grid_h": 0.25})
    assert config.settings == {"grid_h": 0.25}


def test_presets_are_shipped_and_valid():
    assert set(preset_names()) == PRESETS
    infos = {p.name: p for p in list_presets()}
    assert infos["corner-trichotomy-eps0"].slow
    assert not infos["octant-eigen"].slow
    for name in PRESETS:
        assert load_preset(name).id == name


def test_unknown_preset():
    with pytest.raises(PresetNotFound) as info:
        load_preset("no-such-preset")
    assert "octant-eigen" in info.value.context["available"]


def test_preset_overrides():
    config = load_preset("exact-quadratic", {"grids": [0.25]})
    assert config.grids == [0.25]


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_config_hash_is_deterministic():
    a, b = load_preset("octant-eigen"), load_preset("octant-eigen")
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    assert config_hash(a) != config_hash(load_preset("lune-eigen"))


def test_build_domain_kinds():
    dom, P, cone = build_domain(DomainSpec(kind="truncated_cone", normals=[[1, 0], [0, 1]], radius=2.0))
    assert dom.kind == "truncated_cone" and P is None and cone.n_facets == 2
    dom, P, cone = build_domain(DomainSpec(kind="box", lower=[0, 0, 0], upper=[1, 1, 1]))
    assert dom.kind == "box3d"
    dom, P, _ = build_domain(DomainSpec(kind="polytope", normals=[[1, 0], [-1, 0], [0, 1], [0, -1]], offsets=[0, -1, 0, -1]))
    assert P.f_vector() == [4, 4]


def test_build_field_presets():
    spec = DomainSpec(kind="wedge", mu=0.4, dim=3)
    field = build_field(FieldSpec(preset="edge_mode", params={"c": 0.0}), spec)
    assert field([[0.3, 0.1, 0.5]])[0] == pytest.approx(0.5 * (0.09 + 0.01 + 0.25))
    assert build_field(None) is None
    assert build_field(FieldSpec(expression="k*x1", params={"k": 2.0}))([[1.5, 0.0]])[0] == 3.0


def test_cube_conditions(cube, settings):
    points = skeleton_points(cube, 5, settings)[0]
    report = condition_report(cube, jets_from_hessian(np.eye(3), points), 1.0, per_edge=5, settings=settings)
    assert report.simple
    assert report.passed("C1") and report.passed("C2")
    assert report.passed("C3") is False
    assert report.conditions["C4"].evaluated is False
    assert report.conditions["C2"].worst_value == pytest.approx(math.pi / 2)
    assert report.epsilon0.variant == "angle"


def test_octahedron_is_flagged(settings):
    P = cross_polytope(3)
    points = skeleton_points(P, 3, settings)[0]
    report = condition_report(P, jets_from_hessian(np.eye(3), points), 1.0, per_edge=3, settings=settings)
    assert not report.simple
    assert report.notes
    assert report.passed("C2") is False


def test_missing_jets(square, settings):
    with pytest.raises(IncompleteJets):
        condition_report(square, None, 1.0, settings=settings)
    with pytest.raises(IncompleteJets):
        condition_report(square, jets_from_hessian(np.eye(2), [[0.0, 0.0]]), 1.0, settings=settings)


def test_refinement_series_rates():
    report = ResidualReport(max_residual=0.0, convexity_violations=0, refinement=[(0.1, 0.04), (0.05, 0.01)])
    series = refinement_series(report)
    assert series.rows[0][2] is None
    assert series.rows[1][2] == pytest.approx(2.0)


def _document(**extra):
    return ResultDocument(
        experiment_id="probe",
        config_hash="0" * 64,
        version="test",
        status=ExperimentStatus.COMPLETED,
        config=ExperimentConfig(id="probe"),
        created_at="2024-01-01T00:00:00",
        **extra,
    )


def test_emit_plot_data(tmp_path):
    doc = _document(series={"hessian-trend": Series(columns=["h", "max_eigenvalue"], rows=[[0.1, 1.0], [0.05, None]])})
    path = emit_plot_data(doc, "hessian-trend", tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0] == "h,max_eigenvalue"
    assert lines[2].endswith("nan")
    with pytest.raises(SeriesMissing):
        emit_plot_data(doc, "edge-coefficient", tmp_path)


def test_document_pass_state():
    doc = _document(verdicts=[Verdict(name="a", passed=True), Verdict(name="b", passed=False)])
    assert not doc.passed
    assert [v.name for v in doc.failed_verdicts] == ["b"]


def test_run_square_conditions(engine):
    result = engine.run(load_preset("square-conditions"))
    assert result.status == ExperimentStatus.COMPLETED
    assert result.passed, result.failed_verdicts
    assert {"geometry", "conditions"} <= set(result.analyses)
    assert any(v.name == "geometry:theta[b=0.25]" for v in result.verdicts)
    assert result.solver_reports == []
    assert engine.active_experiments == {}


def test_run_eigen_presets(engine):
    for name in ("octant-eigen", "lune-eigen"):
        result = engine.run(load_preset(name))
        assert result.passed, (name, result.failed_verdicts)
    assert "eigen-ladder" in result.series


def test_run_counterexample_and_interpolation(engine):
    for name in ("counterexample-profiles", "interpolation-suite"):
        result = engine.run(load_preset(name))
        assert result.passed, (name, result.failed_verdicts)


def test_exact_quadratic_ladder(engine):
    config = load_preset("exact-quadratic", {"grids": [0.125, 0.0625]})
    result = engine.run(config, only=["refinement"])
    assert result.passed, result.failed_verdicts
    assert [r.h for r in result.solver_reports] == [0.125, 0.0625]
    assert "refinement" in result.series
    assert "comparison" not in result.analyses


def test_comparison_defaults_to_fifty_random_pairs(engine):
    config = _config(domain=SQUARE, f="1", phi={"preset": "half_square_norm"}, grids=[0.25], analyses=[{"kind": "comparison"}])
    result = engine.run(config)
    assert result.passed, result.failed_verdicts
    output = result.analyses["comparison"]
    assert output["pairs"] == 50
    assert output["h"] == 0.25
    assert output["max_difference"] <= 1e-6


def test_hessian_trend_on_a_sheared_quadratic(engine):
    config = _config(
        domain=SQUARE,
        f="0.91",
        phi="0.5*x1^2 + 0.3*x1*x2 + 0.5*x2^2",
        grids=[0.25, 0.125, 0.0625],
        analyses=[{"kind": "hessian-trend"}],
    )
    result = engine.run(config)
    assert result.passed, result.failed_verdicts
    values = result.analyses["hessian-trend"]["max_eigenvalue"]
    assert len(values) == 3
    assert values == pytest.approx([1.3] * 3, abs=1e-4)
    assert "hessian-trend" in result.series


def test_module_error_fails_the_experiment(engine):
    config = _config(domain=SQUARE, f="0.9", phi={"preset": "half_square_norm"}, analyses=[{"kind": "barrier"}])
    result = engine.run(config)
    assert result.status == ExperimentStatus.FAILED
    assert result.error_code == "DETERMINANT_DOMINATION_FAILED"
    assert not result.passed
    json.dumps(result.model_dump(mode="json"))


def test_expected_error_counts_as_outcome(engine):
    config = _config(
        domain=SQUARE,
        f="0.9",
        phi={"preset": "half_square_norm"},
        analyses=[{"kind": "barrier", "expect": {"error": "DETERMINANT_DOMINATION_FAILED"}}],
    )
    result = engine.run(config)
    assert result.status == ExperimentStatus.COMPLETED
    assert result.passed


def test_analysis_without_its_inputs(engine):
    result = engine.run(_config(analyses=[{"kind": "geometry"}]))
    assert result.status == ExperimentStatus.FAILED
    assert result.error_code == "CONFIG_ERROR"


def test_batch_keeps_input_order(engine):
    configs = [load_preset("square-conditions"), load_preset("octant-eigen"), load_preset("square-conditions", {"id": "again"})]
    results = engine.run_batch(configs, threads=2)
    assert [r.experiment_id for r in results] == ["square-conditions", "octant-eigen", "again"]
    assert all(r.passed for r in results)


def test_write_result(tmp_path, engine):
    result = engine.run(load_preset("octant-eigen"))
    out = write_result(result, tmp_path / "octant")
    saved = json.loads((out / "result.json").read_text())
    assert saved["experiment_id"] == "octant-eigen"
    assert saved["status"] == "completed"
    assert json.loads((out / "config.json").read_text())["id"] == "octant-eigen"
    assert (out / "eigen-ladder.csv").is_file()


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_passes(engine, name):
    result = engine.run(load_preset(name))
    assert result.passed, (result.error_code, result.failed_verdicts)
