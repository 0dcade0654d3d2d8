"""Polytope construction, face lattices and tangent cones"""

import numpy as np
import pytest

from core.exceptions import DegenerateInput, InconsistentInput, MuOutOfRange, PointNotOnBoundary, UnboundedInput
from geometry.cones import cone_from_normals, orthant_cone, sample_skeleton, tangent_cone, v_mu_cone
from geometry.polytope import (
    adjacent_facet_pairs,
    build_polytope,
    chebyshev_center,
    euler_characteristic,
    is_simple,
    is_simplicial,
    polytope_from_halfspaces,
    polytope_from_vertices,
    read_polytope,
    skeleton,
    standard_simplex,
    write_polytope,
)

SQUARE_NORMALS = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
SQUARE_OFFSETS = [0.0, -1.0, 0.0, -1.0]


def test_cube_lattice(cube):
    assert cube.f_vector() == [8, 12, 6]
    assert is_simple(cube)
    assert not is_simplicial(cube)
    assert euler_characteristic(cube) == 2
    assert len(adjacent_facet_pairs(cube)) == 12


def test_octahedron_is_simplicial_not_simple(octahedron):
    assert octahedron.f_vector() == [6, 12, 8]
    assert not is_simple(octahedron)
    assert is_simplicial(octahedron)
    assert all(len(v.containing_facet_ids) == 4 for v in octahedron.faces[0])


def test_simplex_is_simple_and_simplicial():
    T = standard_simplex(3)
    assert T.f_vector() == [4, 6, 4]
    assert is_simple(T) and is_simplicial(T)


def test_normals_are_unit_and_inward(cube):
    assert np.allclose(np.linalg.norm(cube.normals, axis=1), 1.0)
    assert np.all(cube.slack([[0.5, 0.5, 0.5]]) > 0)


def test_halfspace_and_vertex_forms_agree(square):
    Q = polytope_from_halfspaces(SQUARE_NORMALS, SQUARE_OFFSETS)
    assert Q.lattice_signature() == square.lattice_signature()
    assert np.allclose(np.sort(Q.vertices, axis=0), np.sort(square.vertices, axis=0))


def test_redundant_halfspace_is_dropped():
    Q = polytope_from_halfspaces(SQUARE_NORMALS + [[1.0, 0.0]], SQUARE_OFFSETS + [-1.0])
    assert Q.n_facets == 4
    assert 4 not in Q.facet_sources


def test_unbounded_halfspaces():
    with pytest.raises(UnboundedInput):
        polytope_from_halfspaces([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])


def test_infeasible_halfspaces():
    with pytest.raises(InconsistentInput):
        polytope_from_halfspaces([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [1.0, 0.0, 0.0, -1.0])


def test_flat_vertex_set_is_degenerate():
    with pytest.raises(DegenerateInput):
        polytope_from_vertices([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])


def test_interior_points_are_not_vertices():
    P = polytope_from_vertices([[0, 0], [2, 0], [0, 2], [2, 2], [1, 1], [1, 0]])
    assert P.f_vector() == [4, 4]


def test_chebyshev_center_of_square():
    center, radius = chebyshev_center(np.array(SQUARE_NORMALS), np.array(SQUARE_OFFSETS))
    assert np.allclose(center, [0.5, 0.5])
    assert radius == pytest.approx(0.5)


def test_skeleton_levels(cube):
    assert skeleton(cube, -1) == []
    assert len(skeleton(cube, 0)) == 8
    assert len(skeleton(cube, 1)) == 20
    with pytest.raises(ValueError):
        skeleton(cube, 3)


def test_polytope_file_round_trip(tmp_path, octahedron):
    path = tmp_path / "octahedron.json"
    write_polytope(octahedron, path)
    assert read_polytope(path).lattice_signature() == octahedron.lattice_signature()


def test_build_polytope_checks_declared_dim():
    with pytest.raises(InconsistentInput):
        build_polytope({"dim": 3, "vertices": [[0, 0], [1, 0], [0, 1]]})


def test_tangent_cone_at_vertex(cube):
    cone = tangent_cone(cube, [0.0, 0.0, 0.0])
    assert cone.n_facets == 3
    assert len(cone.adjacent_pairs) == 3
    assert cone.lineality_dim == 0
    assert cone.generators.shape == (3, 3)


def test_tangent_cone_at_edge_point(cube):
    cone = tangent_cone(cube, [0.5, 0.0, 0.0])
    assert cone.n_facets == 2
    assert cone.lineality_dim == 1
    assert np.allclose(np.abs(cone.lineality_basis[:, 0]), [1.0, 0.0, 0.0])


@pytest.mark.parametrize("point", [[0.5, 0.5, 0.5], [2.0, 0.0, 0.0]])
def test_tangent_cone_needs_boundary_point(cube, point):
    with pytest.raises(PointNotOnBoundary):
        tangent_cone(cube, point)


def test_cone_from_normals_quarter_plane():
    cone = cone_from_normals([[1.0, 0.0], [0.0, 2.0]])
    assert cone.n_facets == 2
    assert cone.adjacent_pairs == [(0, 1)]
    assert np.allclose(np.linalg.norm(cone.inward_normals, axis=1), 1.0)
    assert cone.contains([[1.0, 1.0]])[0] and not cone.contains([[-1.0, 1.0]])[0]


def test_cone_without_interior():
    with pytest.raises(DegenerateInput):
        cone_from_normals([[1.0, 0.0], [-1.0, 0.0]])


def test_v_mu_cone_opening():
    cone = v_mu_cone(0.25, 3)
    assert cone.lineality_dim == 1
    ray = [np.cos(np.pi / 4), np.sin(np.pi / 4), 0.0]
    assert cone.contains([ray], tol=1e-12)[0]
    assert not cone.contains([[np.cos(np.pi / 3), np.sin(np.pi / 3), 0.0]])[0]
    with pytest.raises(MuOutOfRange):
        v_mu_cone(1.0)


def test_orthant_cone_quarter_space():
    cone = orthant_cone(3, 2)
    assert cone.n_facets == 2
    assert cone.lineality_dim == 1
    assert cone.adjacent_pairs == [(0, 1)]


def test_sample_skeleton_counts(cube):
    samples = sample_skeleton(cube, 1, 5)
    dims = [s.face_dim for s in samples]
    assert dims.count(0) == 8
    assert dims.count(1) == 12 * 3
    with_faces = sample_skeleton(cube, 2, 5)
    assert [s.face_dim for s in with_faces].count(2) == 6
