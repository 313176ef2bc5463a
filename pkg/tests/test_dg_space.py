import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from broken_sobolev.dg_space import (
    OUTSIDE,
    CellGrid,
    DGFunction,
    basis,
    basis_dlam,
    broken_gradient,
    constant_dg,
    edge_average,
    edge_jump,
    edge_trace,
    eval,
    eval_extended,
    eval_extended_many,
    interpolate,
    locate,
    n_local,
    random_dg,
    reference_nodes,
)
from broken_sobolev.errors import BoundaryEdgeHasNoJump, PointOutsideCell
from broken_sobolev.mesh_gen import l_shape_uniform

# hypothesis tests cannot take function-scoped fixtures
_LSHAPE_U = random_dg(l_shape_uniform(2), 2, seed=11)
_LSHAPE_GRID = CellGrid(_LSHAPE_U.mesh)


def quadratic(p):
    x, y = p[:, 0], p[:, 1]
    return 1 + 2 * x - y + 3 * x * x - x * y + 0.5 * y * y


def quadratic_grad(p):
    x, y = p[:, 0], p[:, 1]
    return np.column_stack([2 + 6 * x - y, -1 - x + y])


class TestBasis:
    @pytest.mark.parametrize("degree", [1, 2])
    def test_kronecker_at_nodes(self, degree):
        assert np.allclose(basis(degree, reference_nodes(degree)), np.eye(n_local(degree)))

    @pytest.mark.parametrize("degree", [1, 2])
    def test_partition_of_unity(self, degree, rng):
        lam = rng.dirichlet(np.ones(3), 20)
        assert np.allclose(basis(degree, lam).sum(axis=-1), 1.0)

    def test_dlam_matches_finite_differences(self, rng):
        lam = rng.dirichlet(np.ones(3), 5)
        h = 1e-6
        d = basis_dlam(2, lam)
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            fd = (basis(2, lam + step) - basis(2, lam - step)) / (2 * h)
            assert np.allclose(d[..., k], fd, atol=1e-8)

    def test_bad_degree(self):
        with pytest.raises(ValueError):
            n_local(3)


class TestInterpolation:
    def test_quadratic_is_reproduced_by_p2(self, lshape2, rng):
        u = interpolate(lshape2, 2, quadratic)
        for cell in rng.integers(0, lshape2.n_cells, 10):
            lam = rng.dirichlet(np.ones(3))
            p = lam @ lshape2.cell_coords[cell]
            assert eval(u, int(cell), p) == pytest.approx(quadratic(p[None])[0], rel=1e-13)
            g = broken_gradient(u, int(cell))(p)
            assert g[0] == pytest.approx(quadratic_grad(p[None])[0], rel=1e-12)

    def test_linear_is_reproduced_by_p1(self, square4):
        u = interpolate(square4, 1, lambda p: 2 * p[:, 0] - 3 * p[:, 1])
        # continuous, so every interior jump vanishes
        for e in square4.interior_edges[:10]:
            assert np.allclose(edge_jump(u, int(e)).coef, 0.0, atol=1e-14)

    def test_coefficient_count_checked(self, square2):
        with pytest.raises(ValueError):
            DGFunction(square2, 1, np.zeros(5))

    def test_coefficients_are_read_only(self, square2):
        u = random_dg(square2, 1, seed=3)
        with pytest.raises(ValueError):
            u.coeffs[0, 0] = 1.0

    def test_arithmetic(self, square2):
        u, v = random_dg(square2, 2, 1), random_dg(square2, 2, 2)
        assert np.allclose((u + v - u).coeffs, v.coeffs)
        assert np.allclose((u * 3).coeffs, 3 * u.coeffs)

    def test_json_round_trip(self, square2, lshape2):
        u = random_dg(square2, 2, seed=9)
        back = DGFunction.from_json(square2, u.to_json())
        assert np.array_equal(back.coeffs, u.coeffs)
        with pytest.raises(ValueError):
            DGFunction.from_json(lshape2, u.to_json())

    def test_random_dg_is_seeded(self, square2):
        assert np.array_equal(random_dg(square2, 1, 5).coeffs, random_dg(square2, 1, 5).coeffs)


class TestPointwise:
    def test_eval_outside_cell(self, two_cell_square):
        u = constant_dg(two_cell_square, 1.0)
        with pytest.raises(PointOutsideCell):
            eval(u, 0, (0.1, 0.9))

    def test_eval_on_closed_cell_boundary(self, two_cell_square):
        u = interpolate(two_cell_square, 1, lambda p: p[:, 0] + p[:, 1])
        assert eval(u, 0, (0.5, 0.5)) == pytest.approx(1.0)
        assert eval(u, 1, (0.5, 0.5)) == pytest.approx(1.0)

    def test_locate_lowest_index_on_ties(self, two_cell_square):
        assert locate(two_cell_square, (0.5, 0.5)) == 0
        assert locate(two_cell_square, (0.1, 0.9)) == 1
        assert locate(two_cell_square, (1.5, 0.5)) == OUTSIDE

    def test_zero_extension(self, lshape2):
        u = constant_dg(lshape2, 2.0)
        assert eval_extended(u, (1.5, 1.5)) == 0.0
        assert eval_extended(u, (0.5, 1.5)) == 2.0

    @given(st.lists(st.tuples(st.floats(-0.5, 2.5), st.floats(-0.5, 2.5)), min_size=1, max_size=30))
    def test_grid_and_walk_agree(self, pts):
        u = _LSHAPE_U
        vec = eval_extended_many(u, pts, _LSHAPE_GRID)
        for p, v in zip(pts, vec):
            assert v == pytest.approx(eval_extended(u, p), abs=1e-12)


class TestEdges:
    def test_jump_orientation(self, two_cell_square):
        # cell 0 carries 1, cell 1 carries 0: the jump is side 0 minus side 1
        u = DGFunction(two_cell_square, 1, [[1, 1, 1], [0, 0, 0]])
        (diag,) = two_cell_square.interior_edges
        t = np.linspace(0, np.sqrt(2), 5)
        assert np.allclose(edge_jump(u, int(diag))(t), 1.0)
        assert np.allclose(edge_average(u, int(diag))(t), 0.5)

    def test_boundary_edge_has_no_jump(self, two_cell_square):
        u = random_dg(two_cell_square, 1)
        b = int(two_cell_square.boundary_edges[0])
        with pytest.raises(BoundaryEdgeHasNoJump):
            edge_jump(u, b)
        with pytest.raises(BoundaryEdgeHasNoJump):
            edge_trace(u, b, 1)

    @pytest.mark.parametrize("degree", [1, 2])
    def test_trace_matches_pointwise_evaluation(self, square2, degree, rng):
        u = random_dg(square2, degree, seed=4)
        for e in square2.interior_edges:
            a, b = square2.vertices[square2.edges[e]]
            L = square2.edge_lengths[e]
            for side in (0, 1):
                tr = edge_trace(u, int(e), side)
                assert tr.poly.degree() <= degree
                for s in rng.uniform(0, 1, 3):
                    cell = int(square2.edge_cells[e, side])
                    assert tr(s * L) == pytest.approx(eval(u, cell, a + s * (b - a)), abs=1e-12)

