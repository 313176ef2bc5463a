import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import linear_norms
from broken_sobolev.broken_norms import (
    Bump,
    SeminormSpec,
    cell_integrals,
    edge_jump_integrals,
    ibp_residual,
    norm_breakdown,
    parse_seminorm,
    seminorm,
)
from broken_sobolev.dg_space import DGFunction, constant_dg, interpolate, random_dg
from broken_sobolev.errors import EmptyRegion
from broken_sobolev.mesh_gen import l_shape_uniform, unit_square_uniform

SQUARE = unit_square_uniform(3)


class TestNormTerms:
    def test_constant(self, lshape2):
        nb = norm_breakdown(constant_dg(lshape2, 2.0))
        assert nb.l2_sq == pytest.approx(12.0, rel=1e-14)
        assert nb.broken_h1_sq == 0.0
        assert nb.jump_sq == pytest.approx(0.0, abs=1e-28)
        assert nb.boundary_l2_sq == pytest.approx(4.0 * 8.0, rel=1e-14)  # perimeter 8

    def test_linear_cellwise_closed_forms(self, square2, rng):
        u = random_dg(square2, 1, seed=21)
        l2, h1 = cell_integrals(u)
        for c in range(square2.n_cells):
            ref_l2, ref_h1, _ = linear_norms(square2.cell_coords[c], u.coeffs[c])
            assert l2[c] == pytest.approx(ref_l2, rel=1e-13)
            assert h1[c] == pytest.approx(ref_h1, rel=1e-12)

    def test_jump_of_linear_traces(self, square2):
        u = random_dg(square2, 1, seed=22)
        jumps = edge_jump_integrals(u)
        for k, e in enumerate(square2.interior_edges):
            a, b = square2.edges[e]
            vals = []
            for side in (0, 1):
                cell = square2.edge_cells[e, side]
                loc = list(square2.cells[cell])
                vals.append(u.coeffs[cell, [loc.index(a), loc.index(b)]])
            d = vals[0] - vals[1]
            L = square2.edge_lengths[e]
            assert jumps[k] == pytest.approx(L / 3 * (d[0] ** 2 + d[0] * d[1] + d[1] ** 2), rel=1e-12)

    def test_jump_weight(self, two_cell_square):
        u = DGFunction(two_cell_square, 1, [[1, 1, 1], [0, 0, 0]])
        # [u] = 1 on the diagonal of length sqrt 2: weighted integral is 1
        assert norm_breakdown(u).jump_sq == pytest.approx(1.0, rel=1e-14)
        assert norm_breakdown(u, jump_exponent=1.0).jump_sq == pytest.approx(2.0, rel=1e-14)

    def test_continuous_function_has_no_jump(self, lshape2):
        u = interpolate(lshape2, 2, lambda p: p[:, 0] ** 2 - p[:, 0] * p[:, 1])
        assert norm_breakdown(u).jump_sq < 1e-26

    def test_serialisation(self, square2):
        nb = norm_breakdown(random_dg(square2, 2, 3))
        assert nb.h1h_norm == pytest.approx(np.sqrt(nb.l2_sq + nb.broken_h1_sq + nb.jump_sq))
        assert len(nb.csv_row().split(",")) == 5
        assert '"h1h_norm"' in nb.to_json()

    @given(st.integers(0, 10_000), st.floats(-5, 5), st.sampled_from([1, 2]))
    def test_homogeneous_of_degree_two(self, seed, c, degree):
        u = random_dg(SQUARE, degree, seed)
        a, b = norm_breakdown(u), norm_breakdown(u * c)
        assert b.h1h_norm_sq == pytest.approx(c * c * a.h1h_norm_sq, rel=1e-12, abs=1e-300)

    @given(st.integers(0, 10_000), st.integers(0, 10_000))
    def test_triangle_inequality(self, s1, s2):
        u, v = random_dg(SQUARE, 2, s1), random_dg(SQUARE, 2, s2)
        assert norm_breakdown(u + v).h1h_norm <= norm_breakdown(u).h1h_norm + norm_breakdown(v).h1h_norm + 1e-12


class TestSeminorms:
    def test_f1_of_constant(self, square2):
        assert seminorm(constant_dg(square2, 3.0), parse_seminorm("f1:all-boundary", square2)) == pytest.approx(6.0)

    def test_f2_left_of_linear(self, square2):
        u = interpolate(square2, 1, lambda p: p[:, 1])
        assert seminorm(u, parse_seminorm("f2:left", square2)) == pytest.approx(0.5, rel=1e-14)

    def test_f3(self, lshape2):
        u = interpolate(lshape2, 1, lambda p: p[:, 0])
        # int_L x = 1/2 + 3/2 + 1/2 over the three unit squares
        assert seminorm(u, parse_seminorm("f3:all", lshape2)) == pytest.approx(2.5, rel=1e-14)
        half = parse_seminorm("f3:left-half", lshape2)
        assert half.measure(lshape2) < 3.0

    def test_region_measures(self, lshape2):
        assert parse_seminorm("f1:all-boundary", lshape2).measure(lshape2) == pytest.approx(8.0)
        assert parse_seminorm("f2:left", lshape2).measure(lshape2) == pytest.approx(2.0)
        assert parse_seminorm("f2:bottom", lshape2).measure(lshape2) == pytest.approx(2.0)

    @pytest.mark.parametrize("text", ["f4:all", "f1:nowhere", "f1all", "f3:left", "f2:all"])
    def test_parse_errors(self, text, square2):
        with pytest.raises(ValueError):
            parse_seminorm(text, square2)

    def test_empty_region(self, square2):
        with pytest.raises(EmptyRegion):
            parse_seminorm("f3:empty", square2)

    def test_interior_edges_rejected(self, square2):
        with pytest.raises(ValueError):
            SeminormSpec("f1", tuple(square2.interior_edges[:2])).validate(square2)

    @given(st.integers(0, 1000), st.floats(-3, 3))
    def test_absolute_homogeneity(self, seed, c):
        u = random_dg(SQUARE, 1, seed)
        for text in ("f1:all-boundary", "f2:left", "f3:all"):
            spec = parse_seminorm(text, SQUARE)
            assert seminorm(u * c, spec) == pytest.approx(abs(c) * seminorm(u, spec), rel=1e-12, abs=1e-14)


class TestIntegrationByParts:
    def test_bump_gradient(self, rng):
        phi = Bump((0.5, 0.5), 0.4)
        x = rng.uniform(0.2, 0.8, (10, 2))
        h = 1e-6
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (phi(x + e) - phi(x - e)) / (2 * h)
            assert np.allclose(phi.grad(x)[:, k], fd, atol=1e-7)
        assert phi(np.array([[0.9, 0.5]]))[0] == 0.0

    @pytest.mark.parametrize("degree", [1, 2])
    @pytest.mark.parametrize("component", [0, 1])
    def test_identity_holds_for_random_dg(self, degree, component):
        mesh = l_shape_uniform(2)
        u = random_dg(mesh, degree, seed=7)
        assert ibp_residual(u, Bump((0.6, 0.7), 0.5), component=component) < 1e-6

    def test_bump_crossing_boundary_breaks_it(self):
        # negative control: a bump straddling the boundary does not vanish there
        u = constant_dg(SQUARE, 1.0)
        assert ibp_residual(u, Bump((0.0, 0.5), 0.3), levels=3) > 1e-2
