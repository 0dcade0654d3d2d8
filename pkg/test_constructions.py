"""Piecewise profiles, barrier functions, sub-solutions and the counterexample data"""

import math

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from constructions.barrier import (
    BarrierFunction,
    QuadraticTerm,
    RadialTerm,
    derivative_check,
    fd_hessian,
)
from constructions.counterexample import counterexample_bundle, mu_k, rescaled_window
from constructions.profiles import (
    Piecewise1D,
    counterexample_rhs,
    corner_bump,
    radial_ramp,
    smooth_cutoff,
    smoothstep,
    barrier_h_profile,
)
from constructions.sampling import interior_grid
from constructions.subsolution import simple_subsolution_3d, vertex_adapted_hessian, vertex_normals
from constructions.small_f import small_f_barrier, uniform_convexity_constant
from core.exceptions import (
    ACheckFailed,
    ContinuityViolation,
    DeterminantDominationFailed,
    HypothesisViolated,
    NotUniformlyConvex,
)
from core.models import SecondOrderJet
from normalize.angles import theta_functionals
from solver.fields import ScalarField


def test_bump_shape():
    eps0 = 0.1
    g = corner_bump(eps0)
    assert g(np.array([0.05]))[0] == pytest.approx(-0.05)
    assert g(np.array([0.3]))[0] == pytest.approx(-1.25 * eps0)
    assert g.min_derivative(2) >= -1e-12
    assert g.max_derivative(1) <= 1e-12
    for nu in range(3):
        assert g.jump(nu)[0] <= 0


def test_bump_connector_is_the_lowest_convex_degree():
    g = corner_bump(0.1)
    assert len(g.pieces[1]) == 9
    basis = [Polynomial.basis(k) for k in range(6)]
    A = np.array([[b.deriv(nu)(s) for b in basis] for s in (0.0, 1.0) for nu in range(3)])
    quintic = Polynomial(np.linalg.solve(A, [-1.0, -1.0, 0.0, -1.25, 0.0, 0.0]))
    assert np.allclose(quintic.deriv(2).coef, [0.0, 21.0, -51.0, 30.0])
    assert quintic.deriv(2)(0.9) < 0


def test_h_profile_starts_flat():
    delta = 0.5
    d = delta**3
    h = barrier_h_profile(delta)
    t = np.array([0.0, d / 4, 3 * d / 4, 2 * d])
    assert h(t[:1])[0] == pytest.approx(0.0, abs=1e-15)
    assert h(t[:1], 1)[0] == pytest.approx(0.0, abs=1e-15)
    assert h(t, 2) == pytest.approx([1.0, 1.0, 0.5, 0.0])


def test_ramp_and_steps():
    k = radial_ramp(0.1, 0.2)
    assert k(np.array([0.05]))[0] == 0.0
    assert k(np.array([0.5]), 2)[0] == pytest.approx(1.0)
    step = smoothstep(0.0, 1.0)
    assert step(np.array([0.0, 0.5, 1.0])) == pytest.approx([0.0, 0.5, 1.0])
    cut = smooth_cutoff(0.5, 1.0)
    assert cut(np.array([0.2, 0.75, 2.0])) == pytest.approx([1.0, 0.5, 0.0])


def test_declared_continuity_is_verified():
    with pytest.raises(ContinuityViolation):
        Piecewise1D(breakpoints=[0.0], pieces=[[0.0], [1.0]], continuity_class="C0")
    with pytest.raises(ContinuityViolation):
        Piecewise1D(breakpoints=[0.0], pieces=[[0.0, 0.0, -1.0], [0.0]], continuity_class="C0", convex=True)


@pytest.mark.parametrize("k_max", [3, 10])
def test_dyadic_profiles_hit_their_anchors(k_max):
    profiles = counterexample_rhs(k_max)
    for k in range(1, k_max + 1):
        t = 3.0 / 2.0 ** (k + 2)
        assert profiles.G(np.array([t]))[0] == pytest.approx(1.0 - t, abs=1e-14)
        assert profiles.G_tilde(np.array([t]))[0] == pytest.approx(1.0 - t, abs=1e-14)
    t = np.linspace(0.0, 0.5, 2001)
    assert np.all(profiles.G(t) <= profiles.G_tilde(t) + 1e-14)
    assert profiles.G(np.array([0.5]))[0] == pytest.approx(0.5)


def test_openings_follow_the_profile():
    G = counterexample_rhs(6).G
    mus = [mu_k(k) for k in range(1, 7)]
    assert all(a < b < 0.5 for a, b in zip(mus, mus[1:]))
    for k, mu in enumerate(mus, start=1):
        t = 3.0 / 2.0 ** (k + 2)
        assert math.cos(math.pi * mu) == pytest.approx(math.sqrt(1.0 - G(np.array([t]))[0]))
    with pytest.raises(ValueError):
        mu_k(0)


def test_counterexample_bundle_ordering():
    bundle = counterexample_bundle(k_max=4)
    assert bundle.polytope.f_vector() == [4, 6, 4]
    assert bundle.mu == pytest.approx([mu_k(k) for k in range(1, 5)])
    pts = interior_grid(bundle.polytope, 20_000)
    F, F_tilde, det_phi = bundle.F(pts), bundle.F_tilde(pts), bundle.det_phi(pts)
    assert np.all(det_phi > 0)
    assert np.all(F <= F_tilde + 1e-12)
    assert np.all(F_tilde <= det_phi + 1e-12)


def test_rescaled_window_of_the_quadratic():
    k = 3
    window = rescaled_window(k)
    assert window.to_domain(np.zeros((1, 3)))[0] == pytest.approx([0.0, 0.0, 3.0 / 2.0 ** (k + 2)])
    half = ScalarField.half_square_norm()
    W = window.pullback(half, float(half([window.center])[0]), window.center)
    x = np.random.default_rng(1).normal(size=(20, 3))
    Ax = window.normalizing_map.apply(x)
    assert W(x) == pytest.approx(0.5 * np.sum(Ax**2, axis=1))


def test_vertex_adapted_hessian_angles(cube):
    H = vertex_adapted_hessian(vertex_normals(cube, 0))
    assert np.all(np.linalg.eigvalsh(H) > 0)
    theta = theta_functionals(SecondOrderJet.quadratic(H, cube.vertices[0]), cube).theta_max
    assert theta == pytest.approx(math.acos(0.25))


def test_vertex_adapted_hessian_rejections(cube, octahedron):
    with pytest.raises(ValueError):
        vertex_adapted_hessian(vertex_normals(cube, 0), -0.6)
    with pytest.raises(ACheckFailed):
        vertex_adapted_hessian(vertex_normals(octahedron, 0))
    with pytest.raises(ACheckFailed):
        simple_subsolution_3d(octahedron)


def test_fd_hessian_of_a_quadratic():
    H = fd_hessian(ScalarField.half_square_norm(), np.array([[0.3, -0.2, 0.7]]))
    assert np.allclose(H[0], np.eye(3), atol=1e-6)


def test_derivative_check_passes_on_smooth_terms(rng):
    barrier = BarrierFunction(
        [QuadraticTerm(np.diag([1.0, 2.0]), [0.1, 0.2]), RadialTerm(radial_ramp(0.1, 0.3), np.eye(2), [0.5, 0.5])],
        dim=2,
    )
    check = derivative_check(barrier, rng.uniform(-1.0, 1.0, size=(200, 2)), step=1e-5, tol=1e-4)
    assert check.passed
    assert check.probes == 200


def test_uniform_convexity_of_half_square(square, settings):
    c = uniform_convexity_constant(square, ScalarField.half_square_norm(), pairs=2000, settings=settings)
    assert c == pytest.approx(0.5, rel=1e-4)


def test_barrier_rejects_flat_data(square, settings):
    with pytest.raises(NotUniformlyConvex):
        small_f_barrier(square, 0.01, "x1 + x2", settings=settings)
    with pytest.raises(HypothesisViolated):
        small_f_barrier(square, 0.01, ScalarField.half_square_norm(), delta=1.5, settings=settings)


def test_barrier_fails_for_large_f(square, settings):
    with pytest.raises(DeterminantDominationFailed):
        small_f_barrier(square, 0.9, ScalarField.half_square_norm(), settings=settings)


def test_default_barrier_uses_the_cutoff_bulk(square, settings):
    coarse = settings.merged({"max_probes": 4096, "boundary_pairs": 500})
    delta = 0.15 ** (1.0 / 3.0)
    result = small_f_barrier(square, 0.001, ScalarField.half_square_norm(), settings=coarse)
    bulk = result.barrier.terms[-1]
    assert isinstance(bulk, RadialTerm)
    assert bulk.weight == pytest.approx(2.0 * delta**6)
    assert bulk.profile.breakpoints == pytest.approx([0.5 * delta**6, delta**6])
    assert "bulk=cutoff" in result.barrier.label
    assert result.report.passed
    # vanishes near the anchor and stays below delta^6 |x - p0|^2
    x = np.array([[0.005, 0.0], [0.3, 0.4], [1.0, 1.0]])
    values = bulk.evaluate(x)[0]
    assert values[0] == 0.0
    assert np.all(values <= delta**6 * np.sum(x**2, axis=1))


@pytest.mark.slow
def test_barrier_certified_for_small_f(square, settings):
    result = small_f_barrier(square, 0.001, ScalarField.half_square_norm(), settings=settings)
    assert result.report.passed
    assert result.report.boundary_worst_excess <= 1e-12
    assert result.report.determinant_worst_margin >= 0.0


@pytest.mark.slow
def test_radial_bulk_reaches_larger_f(square, settings):
    result = small_f_barrier(square, 0.01, ScalarField.half_square_norm(), bulk="radial", settings=settings)
    assert result.report.passed


@pytest.mark.slow
def test_cube_subsolution(cube, settings):
    sub = simple_subsolution_3d(cube, eps0=0.2, settings=settings)
    report = sub.report
    assert len(report.vertex_theta) == 8
    assert max(report.vertex_theta) < math.pi / 2
    assert report.strong_a_condition
    assert report.convex
    assert report.passed
    check = derivative_check(sub.barrier, interior_grid(cube, 500), step=1e-5, tol=1e-3)
    assert check.passed
