"""Spherical Dirichlet eigenvalues and the Liouville gap"""

import math

import pytest
from pydantic import ValidationError

from core.exceptions import MeshFailure, OpeningOutOfRange
from geometry.cones import cone_from_normals, orthant_cone, v_mu_cone
from spectral.eigen import (
    SphericalDomain,
    cone_opening,
    eigenvalue_gap_check,
    exponent_from_lambda,
    lambda1_arc,
    lambda1_spherical,
)


def test_quarter_arc_is_exact():
    result = lambda1_arc(math.pi / 2)
    assert result.lambda1 == 4.0
    assert result.exponent_mu == 2.0
    assert result.mesh_size == 0.0


@pytest.mark.parametrize("opening", [0.0, 2.0 * math.pi, -1.0])
def test_arc_opening_range(opening):
    with pytest.raises(OpeningOutOfRange):
        lambda1_arc(opening)


@pytest.mark.parametrize("lam, n, mu", [(12.0, 3, 3.0), (6.0, 3, 2.0), (4.0, 2, 2.0), (2.0, 3, 1.0)])
def test_exponent_from_lambda(lam, n, mu):
    assert exponent_from_lambda(lam, n) == pytest.approx(mu)


def test_planar_openings():
    assert cone_opening(orthant_cone(2)) == pytest.approx(math.pi / 2)
    assert cone_opening(v_mu_cone(0.3)) == pytest.approx(0.3 * math.pi)
    assert cone_opening(cone_from_normals([[0.0, 1.0]])) == pytest.approx(math.pi)


def test_planar_gap():
    quarter = eigenvalue_gap_check(orthant_cone(2))
    assert quarter.gap == pytest.approx(0.0)
    assert not quarter.liouville_applicable
    narrow = eigenvalue_gap_check(v_mu_cone(1.0 / 3.0))
    assert narrow.eigen.lambda1 == pytest.approx(9.0)
    assert narrow.liouville_applicable


def test_octant():
    result = lambda1_spherical(SphericalDomain.from_cone(orthant_cone(3)), 0.05)
    assert result.lambda1 == pytest.approx(12.0, rel=0.01)
    assert result.exponent_mu == pytest.approx(3.0, rel=0.01)
    assert len(result.ladder) >= 2
    assert result.ladder[-1].mesh_h <= 0.05
    assert result.lambda2_gt_3
    assert result.eigenfunction.sum() > 0


def test_quarter_space_closes_the_gap():
    gap = eigenvalue_gap_check(orthant_cone(3, 2), 0.05)
    assert gap.eigen.lambda1 == pytest.approx(6.0, rel=0.01)
    assert not gap.liouville_applicable


def test_lune_of_third_wedge():
    result = lambda1_spherical(SphericalDomain.from_cone(v_mu_cone(1.0 / 3.0, 3)), 0.05)
    assert result.lambda1 == pytest.approx(12.0, rel=0.01)


def test_hemisphere():
    result = lambda1_spherical(SphericalDomain.from_cone(cone_from_normals([[0.0, 0.0, 1.0]])), 0.05)
    assert result.lambda1 == pytest.approx(2.0, rel=0.01)


def test_domain_validation():
    with pytest.raises(ValidationError):
        SphericalDomain(n=2)
    with pytest.raises(ValidationError):
        SphericalDomain(n=3)


def test_mesh_size_must_be_positive():
    with pytest.raises(MeshFailure):
        lambda1_spherical(SphericalDomain.from_cone(orthant_cone(3)), 0.0)
