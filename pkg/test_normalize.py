"""Hessian normalization, dihedral angles, the A-condition and epsilon0"""

import math

import numpy as np
import pytest

from core.exceptions import EmptySample, MuOutOfRange, NotOnSkeleton, NotPositiveDefinite
from core.models import AffineMap, SecondOrderJet
from geometry.cones import orthant_cone, tangent_cone
from geometry.polytope import polytope_from_vertices
from normalize.angles import (
    angle_of_quadratic_corner,
    check_a_condition,
    cone_at,
    dihedral_angles,
    epsilon0,
    epsilon0_report,
    satisfies_a_condition,
    theta_functionals,
)
from normalize.jets import a_mu_map, a_mu_rhs_factor, hessian_normalizer, transform_jet


def _random_spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + 0.5 * np.eye(n)


def _corner_jet(b, n=2):
    H = np.eye(n)
    H[0, 1] = H[1, 0] = b
    return SecondOrderJet.quadratic(H, np.zeros(n))


def test_normalizer_whitens_the_hessian(rng):
    for _ in range(20):
        H = _random_spd(rng, 3)
        T = hessian_normalizer(H).linear
        assert np.allclose(T, T.T)
        assert np.allclose(T.T @ H @ T, np.eye(3), atol=1e-10)


@pytest.mark.parametrize("H", [[[1.0, 0.0], [0.0, -1.0]], [[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0, 0.0]]])
def test_normalizer_rejects_bad_hessians(H):
    with pytest.raises(NotPositiveDefinite):
        hessian_normalizer(H)


def test_octant_dihedral_angles():
    report = dihedral_angles(orthant_cone(3))
    assert report.theta_max == pytest.approx(math.pi / 2)
    assert report.theta_min == pytest.approx(math.pi / 2)
    assert len(report.per_pair) == 3


@pytest.mark.parametrize("b", [-0.5, 0.0, 0.5])
def test_square_corner_angle_matches_closed_form(square, b):
    theta = theta_functionals(_corner_jet(b), square).theta_max
    assert theta == pytest.approx(angle_of_quadratic_corner(b), abs=1e-9)
    assert angle_of_quadratic_corner(b) == pytest.approx(math.acos(b))


def test_a_condition_thresholds(square):
    assert satisfies_a_condition(math.pi / 2)
    assert not satisfies_a_condition(math.pi / 2, strong=True)
    assert satisfies_a_condition(math.pi / 3, strong=True)
    assert check_a_condition(_corner_jet(0.5), square, strong=True)
    assert not check_a_condition(_corner_jet(-0.5), square)


def test_cone_at_needs_skeleton_point(square):
    with pytest.raises(NotOnSkeleton):
        cone_at(square, [0.5, 0.5])
    with pytest.raises(NotOnSkeleton):
        cone_at(square, [0.5, 0.0])


def test_affine_covariance(square, rng):
    base = square.vertices[0]
    for _ in range(100):
        H = _random_spd(rng, 2)
        t = rng.uniform(0.0, 2.0 * math.pi)
        turn = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        shear = np.array([[rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0)], [0.0, rng.uniform(0.5, 2.0)]])
        S = AffineMap(linear=shear @ turn, shift=rng.normal(size=2))
        jet = SecondOrderJet.quadratic(H, base)
        moved = polytope_from_vertices(S.inverse().apply(square.vertices))
        expected = theta_functionals(jet, square)
        got = theta_functionals(transform_jet(jet, S), moved)
        assert got.theta_max == pytest.approx(expected.theta_max, abs=1e-8)
        assert got.theta_min == pytest.approx(expected.theta_min, abs=1e-8)


def test_scaling_invariance(cube, rng):
    for _ in range(100):
        H = _random_spd(rng, 3)
        jet = SecondOrderJet.quadratic(H, np.zeros(3))
        scaled = SecondOrderJet.quadratic(rng.uniform(0.1, 10.0) * H, np.zeros(3))
        assert theta_functionals(scaled, cube).theta_max == pytest.approx(theta_functionals(jet, cube).theta_max, abs=1e-9)


def test_orthogonal_invariance(cube, rng):
    for _ in range(20):
        Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        H = _random_spd(rng, 3)
        rotated = polytope_from_vertices(cube.vertices @ Q.T)
        jet = SecondOrderJet.quadratic(H, np.zeros(3))
        turned = SecondOrderJet.quadratic(Q @ H @ Q.T, np.zeros(3))
        assert theta_functionals(turned, rotated).theta_max == pytest.approx(
            theta_functionals(jet, cube).theta_max, abs=1e-8
        )


def test_normalized_cube_corner_is_orthant(cube):
    cone = tangent_cone(cube, [0.0, 0.0, 0.0])
    assert dihedral_angles(cone).theta_max == pytest.approx(math.pi / 2)


def test_a_mu_map_sends_wedge_to_quarter_space():
    mu = 0.4
    A = a_mu_map(mu, 3)
    ray = np.array([math.cos(mu * math.pi), math.sin(mu * math.pi), 0.7])
    assert np.allclose(A.apply(ray), [0.0, 1.0, 0.7], atol=1e-12)
    assert np.allclose(A.apply([1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
    assert A.determinant ** -2 == pytest.approx(a_mu_rhs_factor(mu))


def test_a_mu_range():
    assert a_mu_rhs_factor(0.5) == pytest.approx(1.0)
    with pytest.raises(MuOutOfRange):
        a_mu_map(0.0)
    with pytest.raises(MuOutOfRange):
        a_mu_rhs_factor(1.5)


def test_epsilon0_variants(square):
    jets = [_corner_jet(0.5)]
    report = epsilon0_report(square, jets)
    assert report.variant == "angle"
    assert report.angle_variant == pytest.approx(math.pi / 6)
    assert report.gap_variant is None

    gap = epsilon0_report(square, jets, [0.9], "gap")
    assert gap.gap_variant == pytest.approx(0.9)
    assert gap.selected == pytest.approx(0.9)
    assert epsilon0(square, jets, lambda x: 0.1, "gap") == pytest.approx(math.pi / 6)


def test_epsilon0_errors(square):
    with pytest.raises(EmptySample):
        epsilon0_report(square, [])
    with pytest.raises(EmptySample):
        epsilon0_report(square, [_corner_jet(0.0)], variant="gap")
    with pytest.raises(EmptySample):
        epsilon0_report(square, [_corner_jet(0.0)], [0.1, 0.2])
