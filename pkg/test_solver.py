"""Monotone Dirichlet solves, probes and solution files"""

import math

import numpy as np
import pytest

from core.exceptions import OutOfDomain, PinInfeasible, SolverError
from core.models import AffineMap
from geometry.cones import orthant_cone
from geometry.polytope import polytope_from_vertices, standard_simplex
from solver.dirichlet import (
    boundary_samples,
    check_sandwich,
    liouville_upper_bound,
    sample_field,
    solve_dirichlet,
    solve_ladder,
    solve_truncated_cone,
)
from solver.domains import box_domain, polygon_domain, truncated_cone_domain
from solver.fields import ScalarField
from solver.grid import build_grid
from solver.io import read_solution, write_solution
from solver.newton import convex_envelope
from solver.probes import (
    compare_solutions,
    hessian_at,
    hessian_probe,
    max_hessian_eigenvalue,
    observed_rate,
    residual_report,
)
from solver.scheme import frames_2d, stencil_vectors

HALF_SQUARE = ScalarField.half_square_norm()


def _quadratic(a, b, c):
    return ScalarField.from_expression("0.5*a*x1^2 + b*x1*x2 + 0.5*c*x2^2", {"a": a, "b": b, "c": c})


def test_exact_quadratic_on_square(square, settings):
    h = 1.0 / 16.0
    sol = solve_dirichlet(polygon_domain(square), "1", HALF_SQUARE, h, settings)
    pts, vals = sol.nodes()
    assert np.max(np.abs(vals - HALF_SQUARE(pts))) <= 5 * h * h
    assert sol.convexity_violations == 0
    assert sol.residual < settings.newton_tol
    assert sol.monotone_scheme_id == "wide-stencil-2d-w3"


def test_sheared_quadratic_needs_newton(square, settings):
    h = 1.0 / 16.0
    phi = _quadratic(1.0, 0.3, 1.0)
    sol = solve_dirichlet(polygon_domain(square), 0.91, phi, h, settings)
    pts, vals = sol.nodes()
    assert np.max(np.abs(vals - phi(pts))) <= 5 * h * h
    assert sol.iterations >= 1


def test_exact_quadratic_on_triangle(settings):
    h = 1.0 / 16.0
    sol = solve_dirichlet(polygon_domain(standard_simplex(2)), "1", HALF_SQUARE, h, settings)
    pts, vals = sol.nodes()
    assert np.max(np.abs(vals - HALF_SQUARE(pts))) <= 5 * h * h
    assert np.all(np.isnan(sol.values[~sol.node_mask()]))


def test_exact_quadratic_in_a_box(settings):
    h = 1.0 / 8.0
    sol = solve_dirichlet(box_domain([0, 0, 0], [1, 1, 1]), "1", HALF_SQUARE, h, settings)
    pts, vals = sol.nodes()
    assert np.max(np.abs(vals - HALF_SQUARE(pts))) <= 5 * h * h
    assert sol.monotone_scheme_id == "wide-stencil-3d-full"


def test_negative_rhs_is_rejected(square, settings):
    with pytest.raises(SolverError):
        solve_dirichlet(polygon_domain(square), "-1", HALF_SQUARE, 0.25, settings)


def test_sample_field_marks_outside_nodes():
    sol = sample_field(polygon_domain(standard_simplex(2)), 0.25, HALF_SQUARE)
    pts, vals = sol.nodes()
    assert np.allclose(vals, HALF_SQUARE(pts))
    assert np.all(pts.sum(axis=1) <= 1.0 + 1e-9)
    assert np.count_nonzero(np.isnan(sol.values)) > 0
    assert sol.monotone_scheme_id == "sampled"


def test_probes_recover_a_quadratic(square):
    sol = sample_field(polygon_domain(square), 1.0 / 8.0, _quadratic(1.0, 0.3, 2.0))
    inner = hessian_probe(sol, [0.5, 0.5], (0, 1))
    assert inner.value == pytest.approx(0.3)
    assert inner.stencil == "centered-4pt"
    assert inner.order == 2
    corner = hessian_probe(sol, [0.0, 0.0], (0, 1))
    assert corner.value == pytest.approx(0.3)
    assert corner.order == 1
    assert np.allclose(hessian_at(sol, [0.0, 0.0]), [[1.0, 0.3], [0.3, 2.0]])
    assert max_hessian_eigenvalue(sol) == pytest.approx(np.linalg.eigvalsh([[1.0, 0.3], [0.3, 2.0]])[-1])


def test_probe_rejects_points_off_the_grid(square):
    sol = sample_field(polygon_domain(square), 0.25, HALF_SQUARE)
    with pytest.raises(OutOfDomain):
        hessian_probe(sol, [3.0, 3.0], (0, 0))
    with pytest.raises(ValueError):
        hessian_probe(sol, [0.5, 0.5], (0, 2))


def test_compare_solutions(square):
    dom = polygon_domain(square)
    u = sample_field(dom, 0.125, HALF_SQUARE)
    v = sample_field(dom, 0.125, HALF_SQUARE.plus(ScalarField.constant(-0.1)))
    report = compare_solutions(u, v)
    assert report.max_difference == pytest.approx(0.1)
    assert report.min_difference == pytest.approx(0.1)
    assert report.common_nodes == 81


def test_liouville_upper_bound():
    bound = liouville_upper_bound(0.75)
    assert bound([[1.0, 1.0]])[0] == pytest.approx(1.5)
    assert liouville_upper_bound(1.0)([[1.0, 1.0]])[0] == pytest.approx(1.0)
    with pytest.raises(SolverError):
        liouville_upper_bound(0.0)


def test_half_square_norm_sits_below_the_comparison_quadratic():
    sol = sample_field(truncated_cone_domain(orthant_cone(2), 2.0), 0.125, HALF_SQUARE)
    report = check_sandwich(sol, 0.75)
    assert report.passed
    assert report.max_excess == pytest.approx(0.0, abs=1e-12)
    assert report.slack == pytest.approx(0.25)


def test_observed_rate():
    assert observed_rate([(0.1, 0.01), (0.05, 0.0025)]) == pytest.approx(2.0)
    assert observed_rate([(0.1, 0.01)]) is None
    assert observed_rate([(0.1, 0.0), (0.05, 0.0)]) is None


def test_ladder_report(square, settings):
    ladder = solve_ladder(polygon_domain(square), "1", HALF_SQUARE, [1 / 8, 1 / 16], HALF_SQUARE, settings)
    assert [s.h for s in ladder.solutions] == [1 / 8, 1 / 16]
    assert len(ladder.report.refinement) == 2
    assert all(err <= 5 * h * h for h, err in ladder.report.refinement)
    assert ladder.report.convexity_violations == 0


def test_residual_report_without_exact(square):
    dom = polygon_domain(square)
    ladder = [sample_field(dom, h, HALF_SQUARE) for h in (0.25, 0.125)]
    report = residual_report(ladder[-1], ladder)
    assert len(report.refinement) == 1
    assert report.refinement[0][1] == pytest.approx(0.0, abs=1e-12)


def test_solution_file_round_trip(tmp_path, square):
    sol = sample_field(polygon_domain(standard_simplex(2)), 0.25, HALF_SQUARE)
    path = write_solution(sol, tmp_path / "u.csv")
    back = read_solution(path)
    assert back.grid.shape == sol.grid.shape
    assert back.grid.lower == sol.grid.lower
    assert np.array_equal(back.grid.status, sol.grid.status)
    assert np.allclose(back.values, sol.values, equal_nan=True)
    assert back.monotone_scheme_id == "sampled"


def test_unreadable_solution_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,x2,status,value\n0,0,0,0\n")
    with pytest.raises(SolverError):
        read_solution(path)


def test_pin_must_lie_on_the_unit_sphere(settings):
    with pytest.raises(PinInfeasible):
        solve_truncated_cone(orthant_cone(2), 2.0, 1.0, pin=([0.5, 0.5], 0.0), h=0.25, settings=settings)
    with pytest.raises(PinInfeasible):
        solve_truncated_cone(orthant_cone(2), 2.0, 1.0, pin=([1.0, 0.0], 0.6), h=0.25, settings=settings)


def _square_boundary(m: int = 33) -> np.ndarray:
    t = np.linspace(0.0, 1.0, m)
    zero, one = np.zeros(m), np.ones(m)
    return np.vstack([np.c_[t, zero], np.c_[t, one], np.c_[zero, t], np.c_[one, t]])


def test_convex_envelope_reproduces_affine_data(rng):
    affine = ScalarField.from_expression("2*x1 - x2 + 0.5")
    xb = _square_boundary()
    x = rng.uniform(0.05, 0.95, size=(50, 2))
    assert convex_envelope(xb, affine(xb), x) == pytest.approx(affine(x), abs=1e-9)


def test_convex_envelope_of_convex_data(rng):
    xb = _square_boundary()
    a, b = rng.uniform(0.05, 0.95, size=(2, 200, 2))
    env = convex_envelope(xb, HALF_SQUARE(xb), np.vstack([a, b, 0.5 * (a + b), xb]))
    env_a, env_b, env_mid, env_boundary = env[:200], env[200:400], env[400:600], env[600:]
    # the largest convex function with these boundary values
    assert np.all(env_a >= HALF_SQUARE(a) - 1e-10)
    assert np.all(env_mid <= 0.5 * (env_a + env_b) + 1e-10)
    assert env_boundary == pytest.approx(HALF_SQUARE(xb), abs=1e-9)


def test_boundary_samples_lie_on_the_boundary(settings):
    dom = polygon_domain(standard_simplex(2))
    h = 1.0 / 8.0
    grid = build_grid(dom, h, settings.snap_fraction)
    samples = boundary_samples(grid, dom, [(1, 0), (0, 1), (1, 1)])
    assert len(samples) > len(grid.boundary)
    assert np.all(np.abs(dom.margin(samples)) <= settings.snap_fraction * h + 1e-12)


def test_both_initial_guesses_reach_the_sheared_quadratic(square, settings):
    h = 1.0 / 16.0
    phi = _quadratic(1.0, 0.3, 1.0)
    assert settings.initial_guess == "convex_envelope"
    for chosen in (settings, settings.merged({"initial_guess": "poisson"})):
        sol = solve_dirichlet(polygon_domain(square), 0.91, phi, h, chosen)
        pts, vals = sol.nodes()
        assert np.max(np.abs(vals - phi(pts))) <= 5 * h * h
        assert sol.residual < settings.newton_tol


def test_solve_is_affine_covariant(square, settings):
    h = 1.0 / 8.0
    S = np.array([[1.0, 0.5], [0.0, 1.0]])
    sheared = polytope_from_vertices(square.vertices @ S.T)
    dom = polygon_domain(sheared).model_copy(update={"affine_precompose": AffineMap(linear=S)})
    sol = solve_dirichlet(dom, "1", HALF_SQUARE, h, settings)
    assert sol.frame is not None
    # in the solver frame the data is |S y|^2 / 2 on the unit square
    direct = solve_dirichlet(polygon_domain(square), "1", HALF_SQUARE.pullback(S, np.zeros(2)), h, settings)
    assert sol.grid.shape == direct.grid.shape
    assert np.allclose(sol.values, direct.values, atol=1e-7, equal_nan=True)
    x = np.array([S @ [0.5, 0.5], S @ [0.25, 0.75]])
    assert sol.evaluate_physical(x) == pytest.approx(HALF_SQUARE(x), abs=5 * h * h)


def test_solution_dominates_a_quadratic_subsolution(square, settings):
    h = 1.0 / 8.0
    # det D2 = 0.75 >= f with equal boundary data
    sub = _quadratic(1.0, -0.5, 1.0)
    sol = solve_dirichlet(polygon_domain(square), 0.5, sub, h, settings)
    pts, vals = sol.nodes()
    gap = vals - sub(pts)
    assert np.all(gap >= -1e-7)
    assert gap.max() > 1e-3
    assert sol.convexity_violations == 0


@pytest.mark.parametrize("width, frames, directions", [(1, 2, 4), (3, 8, 16), (4, 12, 24)])
def test_planar_stencil_sizes(width, frames, directions):
    family = frames_2d(width)
    assert len(family) == frames
    assert len(stencil_vectors(family)) == directions


@pytest.mark.slow
def test_quarter_plane_stays_below_the_comparison_quadratic(settings):
    sol = solve_truncated_cone(orthant_cone(2), 4.0, 0.75, h=1.0 / 16.0, settings=settings)
    assert sol.convexity_violations == 0
    assert check_sandwich(sol, 0.75).passed


@pytest.mark.slow
def test_pinned_conic_solution_dips(settings):
    p0 = [1 / math.sqrt(2), 1 / math.sqrt(2)]
    sol = solve_truncated_cone(orthant_cone(2), 2.0, 1.0, pin=(p0, 0.0), h=1.0 / 16.0, settings=settings)
    assert sol.pin_shift is not None
    assert abs(sol.evaluate_physical([p0])[0]) <= settings.pin_tol
