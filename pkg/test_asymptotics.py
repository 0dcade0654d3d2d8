"""Richardson extrapolation, the corner dichotomy, edge fits, interpolation and moduli"""

import math

import numpy as np
import pytest

from asymptotics.corner import classify, corner_jet_extract, necessity_check
from asymptotics.edge import coefficient_is_zero, edge_expansion_fit, edge_oracle_field
from asymptotics.interpolation import (
    check_interpolation,
    interpolation_bound,
    measure_interpolation_quantities,
    polynomial_family,
)
from asymptotics.modulus import modulus_margin_check, modulus_of_continuity
from asymptotics.richardson import richardson_extrapolate
from asymptotics.roots import mixed_root_big, normal_form_jet, solve_mixed_quadratic
from core.exceptions import HypothesisViolated, NoRealRoot, WindowTooSmall
from core.models import DichotomyClass, SecondOrderJet
from solver.dirichlet import sample_field, solve_dirichlet
from solver.domains import polygon_domain, wedge_domain
from solver.fields import ScalarField


def _mixed(b: float) -> ScalarField:
    return ScalarField.from_expression("0.5*(x1^2 + x2^2) + b*x1*x2", {"b": b})


def test_richardson_recovers_a_quadratic_error():
    r = np.array([0.2, 0.1, 0.05])
    result = richardson_extrapolate(1.0 + 4.0 * r**2)
    assert result.extrapolated == pytest.approx(1.0)
    assert result.order == pytest.approx(2.0)


def test_richardson_on_converged_and_short_sequences():
    assert richardson_extrapolate([0.3, 0.3, 0.3]).order is None
    assert richardson_extrapolate([0.3, 0.3, 0.3]).extrapolated == 0.3
    with pytest.raises(ValueError):
        richardson_extrapolate([1.0, 2.0])


def test_richardson_clamps_the_order():
    result = richardson_extrapolate([1.0, 1.1, 1.2])
    assert result.order == 0.5
    assert result.extrapolated == pytest.approx(1.2 + 0.1 / (math.sqrt(2.0) - 1.0))


@pytest.mark.parametrize("n", [2, 3])
def test_mixed_quadratic_roots(n):
    roots = solve_mixed_quadratic(normal_form_jet(n), 0.75)
    assert roots.small_root == pytest.approx(-0.5)
    assert roots.big_root == pytest.approx(0.5)
    assert mixed_root_big(normal_form_jet(n), 0.0) == pytest.approx(1.0)


def test_mixed_quadratic_rejections():
    with pytest.raises(NoRealRoot):
        solve_mixed_quadratic(normal_form_jet(2), 1.5)
    with pytest.raises(ValueError):
        solve_mixed_quadratic(normal_form_jet(2), 0.5, (1, 1))
    unknown_diagonal = SecondOrderJet.quadratic([[np.nan, np.nan], [np.nan, 1.0]])
    with pytest.raises(HypothesisViolated):
        solve_mixed_quadratic(unknown_diagonal, 0.5)


def test_classify_order():
    assert classify(0.5, 0.2, -0.5, 0.5, 0.05, 0.05) == DichotomyClass.NOT_C2
    assert classify(0.48, 0.01, -0.5, 0.5, 0.05, 0.05) == DichotomyClass.PLUS_ROOT_BRANCH
    assert classify(-0.5, 0.01, -0.5, 0.5, 0.05, 0.05) == DichotomyClass.EQUALS_SUBSOLUTION
    # coincident roots never count as the plus branch
    assert classify(0.0, 0.0, 0.0, 0.0, 0.05, 0.05) == DichotomyClass.EQUALS_SUBSOLUTION


@pytest.mark.parametrize("u12", [3.0, 0.0, -0.56, 0.56])
def test_classify_far_from_both_roots_is_inconclusive(u12):
    assert classify(u12, 0.0, -0.5, 0.5, 0.05, 0.05) == DichotomyClass.INCONCLUSIVE


def test_corner_extract_flags_a_value_off_both_roots(square, settings):
    # u12 = 0 solves 1 - u12^2 = f only for f = 1
    sol = sample_field(polygon_domain(square), 1.0 / 64.0, _mixed(0.0), settings)
    verdict = corner_jet_extract(sol, [0.0, 0.0], 0.75, settings=settings)
    assert verdict.classification == DichotomyClass.INCONCLUSIVE
    assert verdict.estimated_u12 == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize(
    "b, expected", [(0.5, DichotomyClass.PLUS_ROOT_BRANCH), (-0.5, DichotomyClass.EQUALS_SUBSOLUTION)]
)
def test_corner_extract_on_sampled_quadratics(square, settings, b, expected):
    sol = sample_field(polygon_domain(square), 1.0 / 64.0, _mixed(b), settings)
    verdict = corner_jet_extract(sol, [0.0, 0.0], 0.75, settings=settings)
    assert verdict.classification == expected
    assert verdict.estimated_u12 == pytest.approx(b)
    assert verdict.direction_spread == pytest.approx(0.0, abs=1e-9)
    assert len(verdict.per_direction) == 3
    assert verdict.per_direction[0].radii == pytest.approx([1 / 8, 1 / 16, 1 / 32])


def test_corner_extract_needs_a_fine_grid(square, settings):
    sol = sample_field(polygon_domain(square), 1.0 / 16.0, _mixed(0.5), settings)
    with pytest.raises(WindowTooSmall):
        corner_jet_extract(sol, [0.0, 0.0], 0.75, settings=settings)


def test_necessity_check():
    assert necessity_check(-0.5, 0.0).not_c2
    assert not necessity_check(0.5, 0.0).not_c2
    assert not necessity_check(-0.5, -0.2).not_c2


@pytest.fixture(scope="module")
def wedge():
    return wedge_domain(0.4)


def test_edge_fit_recovers_the_coefficient(wedge, settings):
    sol = sample_field(wedge, 1.0 / 16.0, edge_oracle_field(0.4, 0.3, q=0.2), settings)
    fit = edge_expansion_fit(sol, 0.4, [-0.5, 0.0, 0.5], settings=settings)
    assert fit.coefficient_c == pytest.approx([0.3, 0.3, 0.3], abs=1e-8)
    assert fit.exponent == pytest.approx(2.5)
    assert fit.fit_window == (0.125, 0.5)
    assert not coefficient_is_zero(fit, settings)


def test_edge_fit_of_the_bare_quadratic(wedge, settings):
    sol = sample_field(wedge, 1.0 / 16.0, edge_oracle_field(0.4, 0.0), settings)
    fit = edge_expansion_fit(sol, 0.4, [0.0], settings=settings)
    assert coefficient_is_zero(fit, settings)
    assert fit.valid


def test_edge_fit_hypotheses(wedge, square, settings):
    sol = sample_field(wedge, 1.0 / 8.0, edge_oracle_field(0.4, 0.3), settings)
    with pytest.raises(HypothesisViolated):
        edge_expansion_fit(sol, 0.3, [0.0], settings=settings)
    with pytest.raises(WindowTooSmall):
        edge_expansion_fit(sol, 0.4, [0.0], settings=settings)
    flat = sample_field(polygon_domain(square), 0.125, _mixed(0.0), settings)
    with pytest.raises(HypothesisViolated):
        edge_expansion_fit(flat, 0.4, [0.0], settings=settings)


def test_interpolation_bound_values():
    bounds = interpolation_bound(1.0, 1.0, 1.0)
    assert bounds.sup_bound == pytest.approx(6.0)
    assert bounds.holder_half_bound == pytest.approx(13.0)
    with pytest.raises(HypothesisViolated):
        interpolation_bound(2.0, 1.0, 0.5)
    with pytest.raises(HypothesisViolated):
        interpolation_bound(1.0, 1.0, 0.0)


def test_interpolation_holds_on_random_polynomials():
    for poly in polynomial_family(25, seed=3):
        check = check_interpolation(poly, 0.5, samples=401)
        assert check.passed, poly


def test_measured_quantities_of_a_line():
    q = measure_interpolation_quantities(lambda t: 2.0 * t, 1.0, samples=101, derivative=lambda t: 2.0 + 0.0 * t)
    assert q.A == pytest.approx(2.0)
    assert q.derivative_sup == pytest.approx(2.0)
    assert q.derivative_holder_half == pytest.approx(0.0)


def test_modulus_of_a_quadratic_is_zero(square):
    sol = sample_field(polygon_domain(square), 1.0 / 16.0, _mixed(0.2))
    report = modulus_of_continuity(sol, [0.5, 0.5], [0.1, 0.2])
    assert report.omega == pytest.approx([0.0, 0.0], abs=1e-9)
    assert report.nodes > 2
    margin = modulus_margin_check([math.pi / 3], 0.1, report)
    assert margin.passed and margin.modulus_bounded


def test_modulus_window_and_margin(square):
    sol = sample_field(polygon_domain(square), 1.0 / 8.0, _mixed(0.2))
    with pytest.raises(WindowTooSmall):
        modulus_of_continuity(sol, [0.5, 0.5], [0.01], window=1e-3)
    assert not modulus_margin_check([math.pi / 2 - 0.05], 0.1).passed
    assert modulus_margin_check([math.pi / 2 - 0.05], 0.1).modulus_bounded is None


def _trichotomy_problem(eps: float):
    return ScalarField.from_expression("0.5*(x1^2 + x2^2) - (0.5 + s)*x1*x2", {"s": eps})


@pytest.mark.slow
@pytest.mark.parametrize(
    "eps, expected",
    [
        (0.0, DichotomyClass.EQUALS_SUBSOLUTION),
        (-0.1, DichotomyClass.PLUS_ROOT_BRANCH),
        (0.2, DichotomyClass.NOT_C2),
    ],
)
def test_corner_trichotomy(square, settings, eps, expected):
    sol = solve_dirichlet(polygon_domain(square), 0.75, _trichotomy_problem(eps), 1.0 / 128.0, settings)
    verdict = corner_jet_extract(sol, [0.0, 0.0], 0.75, settings=settings)
    assert verdict.classification == expected
