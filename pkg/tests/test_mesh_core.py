import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from _oracles import shoelace
from broken_sobolev.errors import DegenerateCell, DuplicateVertex, NonConforming, ParseError
from broken_sobolev.mesh_core import (
    Point,
    build_mesh,
    element_regularity,
    load_mesh,
    mesh_regularity,
    save_mesh,
)
from broken_sobolev.mesh_gen import l_shape_uniform, refine_red, unit_square_uniform

SQRT2 = np.sqrt(2.0)

coord = st.floats(-10, 10, allow_nan=False)
triangles = st.lists(st.tuples(coord, coord), min_size=3, max_size=3).map(np.array)


def _nondegenerate(tri):
    d1, d2 = tri[1] - tri[0], tri[2] - tri[0]
    area = abs(d1[0] * d2[1] - d1[1] * d2[0]) / 2
    diam = max(np.hypot(*(tri[i] - tri[j])) for i, j in ((0, 1), (1, 2), (0, 2)))
    return diam > 1e-3 and area > 1e-3 * diam**2


class TestBuildMesh:
    def test_two_cell_square(self, two_cell_square):
        m = two_cell_square
        assert m.n_edges == 5
        assert len(m.boundary_edges) == 4
        (diag,) = m.interior_edges
        assert m.edge_lengths[diag] == pytest.approx(SQRT2)

    def test_structured_2x2_counts(self, square2):
        assert square2.n_cells == 8
        assert square2.n_edges == 16
        assert len(square2.boundary_edges) == 8
        assert len(square2.interior_edges) == 8

    def test_edge_shared_by_three_cells(self):
        verts = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [1.5, 0.5]]
        with pytest.raises(NonConforming):
            build_mesh(verts, [[0, 1, 2], [0, 1, 3], [0, 1, 4]])

    def test_hanging_node(self):
        # vertex 4 sits on the bottom edge of cell 0 without splitting it
        verts = [[0, 0], [2, 0], [1, 1], [1, 0], [1, -1]]
        with pytest.raises(NonConforming):
            build_mesh(verts, [[0, 1, 2], [0, 3, 4], [3, 1, 4]])

    def test_overlapping_cells(self):
        verts = [[0, 0], [1, 0], [0, 1], [1, 1]]
        # both cells on the same side of edge 0-1
        with pytest.raises(NonConforming):
            build_mesh(verts, [[0, 1, 2], [3, 0, 1]])

    def test_duplicate_vertex(self):
        with pytest.raises(DuplicateVertex):
            build_mesh([[0, 0], [1, 0], [0, 1], [1, 0]], [[0, 1, 2]])

    def test_zero_area_cell(self):
        with pytest.raises(DegenerateCell):
            build_mesh([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]])

    def test_clockwise_input_is_reoriented(self):
        m = build_mesh([[0, 0], [0, 1], [1, 0]], [[0, 1, 2]])
        assert m.cell_areas[0] == pytest.approx(0.5)
        P = m.cell_coords[0]
        d1, d2 = P[1] - P[0], P[2] - P[0]
        assert d1[0] * d2[1] - d1[1] * d2[0] > 0

    def test_interior_normals_are_opposite(self, square4):
        ie = square4.interior_edges
        n = square4.edge_normals[ie]
        assert np.allclose(n[:, 0], -n[:, 1], atol=1e-15)
        assert np.allclose(np.hypot(*n[:, 0].T), 1.0)

    def test_normals_point_out_of_their_cell(self, square4):
        m = square4
        mid = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
        for s in (0, 1):
            has = m.edge_cells[:, s] >= 0
            cen = m.cell_coords[m.edge_cells[has, s]].mean(axis=1)
            out = np.einsum("kd,kd->k", mid[has] - cen, m.edge_normals[has, s])
            assert np.all(out > 0)

    def test_edge_view(self, two_cell_square):
        (diag,) = two_cell_square.interior_edges
        e = two_cell_square.edge(int(diag))
        assert e.kind == "interior"
        assert e.side_cells == (0, 1)
        assert e.length == pytest.approx(SQRT2)

    def test_boundary_loop_closed(self, lshape2):
        (loop,) = lshape2.boundary_polygon
        assert len(loop) == len(lshape2.boundary_edges)
        poly = lshape2.outer_boundary()
        assert shoelace(poly) == pytest.approx(3.0)

    def test_mesh_is_immutable(self, two_cell_square):
        with pytest.raises(ValueError):
            two_cell_square.vertices[0, 0] = 5.0

    def test_point_rejects_nan(self):
        with pytest.raises(ValueError):
            Point(float("nan"), 0.0)


class TestRegularity:
    def test_equilateral(self):
        tri = [[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]]
        r, R, ratio, ang = element_regularity(tri)
        assert r == pytest.approx(1 / (2 * np.sqrt(3)), rel=1e-14)
        assert R == pytest.approx(1 / np.sqrt(3), rel=1e-14)
        assert ratio == pytest.approx(2.0, rel=1e-14)
        assert ang == pytest.approx(np.pi / 3, rel=1e-14)

    def test_right_isosceles(self):
        _, _, ratio, _ = element_regularity([[0, 0], [1, 0], [0, 1]])
        assert ratio == pytest.approx(1 + SQRT2, rel=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateCell):
            element_regularity([[0, 0], [1, 1], [2, 2]])

    def test_two_cell_square(self, two_cell_square):
        rep = mesh_regularity(two_cell_square)
        assert rep.K == pytest.approx(1 + SQRT2, rel=1e-14)
        assert rep.theta_K == pytest.approx(np.pi / 4, rel=1e-14)

    def test_red_refinement_keeps_K(self, square2):
        m = square2
        K0 = mesh_regularity(m)
        for _ in range(3):
            m = refine_red(m)
            rep = mesh_regularity(m)
            assert rep.K == pytest.approx(K0.K, rel=1e-12)
            assert rep.theta_K == pytest.approx(K0.theta_K, rel=1e-12)

    @given(triangles, st.floats(0, 2 * np.pi), st.floats(0.01, 100), st.tuples(coord, coord))
    def test_rigid_motion_and_scale_invariance(self, tri, angle, lam, shift):
        assume(_nondegenerate(tri))
        c, s = np.cos(angle), np.sin(angle)
        moved = lam * tri @ np.array([[c, s], [-s, c]]) + np.array(shift)
        r0, R0, q0, a0 = element_regularity(tri)
        r1, R1, q1, a1 = element_regularity(moved)
        assert q1 == pytest.approx(q0, rel=1e-9)
        assert a1 == pytest.approx(a0, rel=1e-9, abs=1e-12)
        assert r1 == pytest.approx(lam * r0, rel=1e-9)
        assert R1 == pytest.approx(lam * R0, rel=1e-9)

    @given(triangles)
    def test_ratio_at_least_two(self, tri):
        assume(_nondegenerate(tri))
        _, _, ratio, ang = element_regularity(tri)
        assert ratio >= 2 - 1e-12
        assert 0 < ang <= np.pi / 3 + 1e-12


class TestMeshFiles:
    def test_round_trip(self, tmp_path, square4):
        base = save_mesh(square4, tmp_path / "m")
        back = load_mesh(base)
        assert np.array_equal(back.vertices, square4.vertices)
        assert np.array_equal(back.cells, square4.cells)
        assert back.hash() == square4.hash()

    def test_round_trip_irrational_coordinates(self, tmp_path):
        m = build_mesh([[0, 0], [np.pi, 0], [np.e, np.sqrt(2)]], [[0, 1, 2]])
        back = load_mesh(save_mesh(m, tmp_path / "t.node"))
        assert np.array_equal(back.vertices, m.vertices)

    def test_one_based(self, tmp_path):
        (tmp_path / "a.node").write_text("4 2 0 1\n1 0 0 1\n2 1 0 1\n3 1 1 1\n4 0 1 1\n")
        (tmp_path / "a.ele").write_text("# comment\n2 3 0\n1 1 2 3\n2 1 3 4\n")
        m = load_mesh(tmp_path / "a")
        assert m.n_cells == 2
        assert m.cells.min() == 0

    def test_missing_node_reference(self, tmp_path):
        (tmp_path / "b.node").write_text("3 2 0 0\n0 0 0\n1 1 0\n2 0 1\n")
        (tmp_path / "b.ele").write_text("1 3 0\n0 0 1 7\n")
        with pytest.raises(ParseError) as info:
            load_mesh(tmp_path / "b")
        assert info.value.kind == "ParseError"

    def test_non_conforming_propagates(self, tmp_path):
        (tmp_path / "c.node").write_text("5 2 0 0\n0 0 0\n1 2 0\n2 1 1\n3 1 0\n4 1 -1\n")
        (tmp_path / "c.ele").write_text("3 3 0\n0 0 1 2\n1 0 3 4\n2 3 1 4\n")
        with pytest.raises(NonConforming):
            load_mesh(tmp_path / "c")


@pytest.mark.parametrize("mesh", [unit_square_uniform(3), l_shape_uniform(2), refine_red(l_shape_uniform(1))])
def test_area_matches_boundary_polygon(mesh):
    assert mesh.area() == pytest.approx(shoelace(mesh.outer_boundary()), rel=1e-12)


@pytest.mark.parametrize("mesh", [unit_square_uniform(3), l_shape_uniform(2)])
def test_incidence_count(mesh):
    assert 3 * mesh.n_cells == 2 * len(mesh.interior_edges) + len(mesh.boundary_edges)
