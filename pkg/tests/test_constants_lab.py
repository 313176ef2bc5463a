import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import assume, given
from hypothesis import strategies as st

from _oracles import element_trace_reference, generalized_eigenvalues
from broken_sobolev import constants_lab as cl
from broken_sobolev.broken_norms import norm_breakdown, parse_seminorm, seminorm
from broken_sobolev.dg_space import DGFunction, constant_dg, random_dg
from broken_sobolev.errors import NoConvergence, SeminormKillsNoConstants, SingularB
from broken_sobolev.mesh_gen import degenerate_aspect, graded_corner, parse_family, refine_red, unit_square_uniform

SQUARE2 = unit_square_uniform(2)
LEVEL1 = refine_red(SQUARE2)  # 96 P1 dofs

# values recorded from a reference run of this implementation
TRACE_RED = [4.2603052819470415, 4.378923904397547, 4.440265836929198]
POINCARE_F1_RED = [0.31707667997722094, 0.34582660526700776, 0.3608657051404098]
POINCARE_F2_GRADED = [1.8906393495400202, 1.9238592232917042, 1.9380579107426614]
DEGENERATE_C = [0.31707667997722094, 0.3463976534298685, 0.39332299112989344, 0.44650646130047056]
STRIP_LEVEL3_02 = 3.2851685713695162

# constants of SQUARE2 used by the random inequality checks
_TRACE = {d: cl.global_trace_constant(SQUARE2, d).constant for d in (1, 2)}
_POINCARE = {
    d: cl.poincare_constant(SQUARE2, d, parse_seminorm("f1:all-boundary", SQUARE2)).constant for d in (1, 2)
}

coord = st.floats(-5, 5, allow_nan=False)
triangles = st.lists(st.tuples(coord, coord), min_size=3, max_size=3).map(np.array)


def _well_shaped(tri, min_angle=np.pi / 12):
    d = [tri[(k + 1) % 3] - tri[k] for k in range(3)]
    L = [np.hypot(*v) for v in d]
    if min(L) < 1e-2:
        return False
    area = 0.5 * abs(d[0][0] * d[1][1] - d[0][1] * d[1][0])
    # smallest angle via the law of sines: sin(a) = 2 area / (b c)
    s = [2 * area / (L[(k + 1) % 3] * L[(k + 2) % 3]) for k in range(3)]
    return np.arcsin(min(1.0, min(s))) >= min_angle


class TestAssembly:
    @pytest.mark.parametrize("degree", [1, 2])
    def test_forms_match_pointwise_quadrature(self, lshape2, degree):
        u = random_dg(lshape2, degree, seed=17)
        v = u.coeffs.ravel()
        f = cl.assemble(lshape2, degree)
        nb = norm_breakdown(u)
        assert v @ f.mass @ v == pytest.approx(nb.l2_sq, rel=1e-12)
        assert v @ f.stiffness @ v == pytest.approx(nb.broken_h1_sq, rel=1e-12)
        assert v @ f.jump @ v == pytest.approx(nb.jump_sq, rel=1e-12)
        bd = cl.boundary_mass_matrix(lshape2, degree)
        assert v @ bd @ v == pytest.approx(nb.boundary_l2_sq, rel=1e-12)

    @pytest.mark.parametrize("text", ["f1:left", "f2:bottom", "f3:left-half"])
    def test_seminorm_forms(self, lshape2, text):
        spec = parse_seminorm(text, lshape2)
        u = random_dg(lshape2, 2, seed=5)
        v = u.coeffs.ravel()
        F = cl.seminorm_matrix(lshape2, 2, spec, dense_rank_one=True)
        assert v @ F @ v == pytest.approx(seminorm(u, spec) ** 2, rel=1e-12)

    def test_kernel_of_stiffness_and_jump(self, square2):
        f = cl.assemble(square2, 2)
        one = np.ones(square2.n_cells * 6)
        assert np.abs((f.stiffness + f.jump) @ one).max() < 1e-12

    def test_low_rank_sum(self, rng):
        base = sp.random(8, 8, density=0.4, random_state=1)
        base = base + base.T
        G = rng.standard_normal((8, 2))
        L = cl.LowRankSum(base, G)
        x = rng.standard_normal(8)
        assert np.allclose(L @ x, L.toarray() @ x)
        assert np.allclose((L * 2.0).toarray(), 2.0 * L.toarray())


class TestEigenSolver:
    def test_dense_against_jacobi_oracle(self):
        f = cl.assemble(SQUARE2, 1)
        bd = cl.boundary_mass_matrix(SQUARE2, 1)
        ref = generalized_eigenvalues(bd.toarray(), f.h1h.toarray())[-1]
        assert cl.global_trace_constant(SQUARE2).constant == pytest.approx(ref, rel=1e-10)

    def test_sparse_path_against_jacobi_oracle(self, monkeypatch):
        f = cl.assemble(LEVEL1, 1)
        bd = cl.boundary_mass_matrix(LEVEL1, 1)
        ref = generalized_eigenvalues(bd.toarray(), f.h1h.toarray())[-1]
        monkeypatch.setattr(cl, "DENSE_LIMIT", 10)
        est = cl.global_trace_constant(LEVEL1)
        assert est.result.iterations > 0
        assert est.constant == pytest.approx(ref, rel=1e-9)

    @pytest.mark.parametrize("text", ["f1:all-boundary", "f2:left", "f3:all"])
    def test_poincare_sparse_equals_dense(self, monkeypatch, text):
        spec = parse_seminorm(text, LEVEL1)
        dense = cl.poincare_constant(LEVEL1, 1, spec).constant
        monkeypatch.setattr(cl, "DENSE_LIMIT", 10)
        sparse = cl.poincare_constant(LEVEL1, 1, spec)
        assert sparse.result.iterations > 0
        assert sparse.constant == pytest.approx(dense, rel=1e-9)

    def test_poincare_against_jacobi_oracle(self):
        spec = parse_seminorm("f2:left", SQUARE2)
        f = cl.assemble(SQUARE2, 1)
        g = cl.load_vector(SQUARE2, 1, spec)
        den = (f.stiffness + f.jump).toarray() + np.outer(g, g)
        lam_min = generalized_eigenvalues(den, f.mass.toarray())[0]
        assert cl.poincare_constant(SQUARE2, 1, spec).constant == pytest.approx(1 / lam_min, rel=1e-10)

    def test_largest_of_diagonal_pair(self):
        pair = cl.SymmetricPair(np.diag([1.0, 5.0, 3.0]), np.diag([1.0, 2.0, 1.0]))
        res = cl.gen_eig_extreme(pair)
        assert res.value == pytest.approx(3.0)
        assert res.residual < 1e-12

    def test_smallest_nonzero_with_kernel(self):
        pair = cl.SymmetricPair(np.diag([0.0, 2.0, 7.0]), np.eye(3), kernel=np.array([1.0, 0, 0]))
        assert cl.gen_eig_extreme(pair, "smallest_nonzero").value == pytest.approx(2.0)

    def test_singular_denominator(self):
        with pytest.raises(SingularB):
            cl.gen_eig_extreme(cl.SymmetricPair(np.eye(2), np.diag([1.0, 0.0])))

    def test_unknown_selector(self):
        with pytest.raises(ValueError):
            cl.gen_eig_extreme(cl.SymmetricPair(np.eye(2), np.eye(2)), "median")

    @pytest.mark.parametrize("limit", [600, 10])
    def test_unreachable_tolerance(self, monkeypatch, limit):
        monkeypatch.setattr(cl, "DENSE_LIMIT", limit)
        with pytest.raises(NoConvergence):
            cl.global_trace_constant(LEVEL1, tol=1e-30)


class TestElementTrace:
    def test_right_triangle(self):
        tri = [[0, 0], [1, 0], [0, 1]]
        assert cl.element_trace_constant(tri, 0).constant == pytest.approx(4.1096, abs=1e-4)
        assert cl.element_trace_constant(tri, 1).constant == pytest.approx(2.2613, abs=1e-4)

    @given(triangles, st.integers(0, 2), st.sampled_from([1, 2]))
    def test_against_exact_reference(self, tri, edge, degree):
        assume(_well_shaped(tri))
        lib = cl.element_trace_constant(tri, edge, degree).constant
        assert lib == pytest.approx(element_trace_reference(tri, edge, degree), rel=1e-9)

    @given(triangles, st.floats(0, 2 * np.pi), st.floats(0.05, 20), st.integers(0, 2))
    def test_similarity_invariance(self, tri, angle, lam, edge):
        assume(_well_shaped(tri))
        c, s = np.cos(angle), np.sin(angle)
        moved = lam * tri @ np.array([[c, s], [-s, c]]) + 1.5
        a = cl.element_trace_constant(tri, edge).constant
        b = cl.element_trace_constant(moved, edge).constant
        assert b == pytest.approx(a, rel=1e-9)

    def test_p2_dominates_p1(self):
        tri = [[0, 0], [1, 0.2], [0.3, 0.8]]
        for e in range(3):
            assert cl.element_trace_constant(tri, e, 2).constant >= cl.element_trace_constant(tri, e, 1).constant

    def test_bad_edge(self):
        with pytest.raises(ValueError):
            cl.element_trace_constant([[0, 0], [1, 0], [0, 1]], 3)


class TestGlobalConstants:
    def test_maximiser_quotient_reevaluated_by_quadrature(self, lshape2):
        est = cl.global_trace_constant(lshape2, 2)
        u = DGFunction(lshape2, 2, est.result.vector)
        nb = norm_breakdown(u)
        assert nb.boundary_l2_sq / nb.h1h_norm_sq == pytest.approx(est.constant, rel=1e-10)

    def test_poincare_maximiser_reevaluated(self, lshape2):
        spec = parse_seminorm("f2:left", lshape2)
        est = cl.poincare_constant(lshape2, 1, spec)
        u = DGFunction(lshape2, 1, est.result.vector)
        nb = norm_breakdown(u)
        q = nb.l2_sq / (nb.broken_h1_sq + nb.jump_sq + seminorm(u, spec) ** 2)
        assert q == pytest.approx(est.constant, rel=1e-10)
        assert est.quotient(est.result.vector) == pytest.approx(est.constant, rel=1e-10)

    @given(st.integers(0, 10_000), st.sampled_from([1, 2]))
    def test_inequalities_hold_for_random_functions(self, seed, degree):
        u = random_dg(SQUARE2, degree, seed)
        nb = norm_breakdown(u)
        C2 = _TRACE[degree]
        assert nb.boundary_l2_sq <= C2 * nb.h1h_norm_sq * (1 + 1e-10)
        spec = parse_seminorm("f1:all-boundary", SQUARE2)
        Cp = _POINCARE[degree]
        assert nb.l2_sq <= Cp * (nb.broken_h1_sq + nb.jump_sq + seminorm(u, spec) ** 2) * (1 + 1e-10)

    @pytest.mark.parametrize("estimator,params", [
        ("trace", {}),
        ("poincare", {"seminorm": "f2:left"}),
        ("strip", {"delta": 0.25}),
    ])
    def test_p2_dominates_p1(self, estimator, params):
        p1 = cl.estimate(SQUARE2, estimator, {**params, "degree": 1}).constant
        p2 = cl.estimate(SQUARE2, estimator, {**params, "degree": 2}).constant
        assert p2 >= p1 * (1 - 1e-12)

    def test_whole_domain_mean_gives_one(self, square2):
        assert cl.poincare_constant(square2, 1, parse_seminorm("f3:all", square2)).constant == pytest.approx(1.0, rel=1e-10)

    def test_seminorm_blind_to_constants(self, square2, monkeypatch):
        monkeypatch.setattr(cl, "seminorm", lambda u, spec: 0.0)
        with pytest.raises(SeminormKillsNoConstants):
            cl.poincare_constant(square2, 1, parse_seminorm("f2:left", square2))

    def test_strip_constant_function_quotient(self, square_level3):
        delta = 0.2
        est = cl.strip_constant(square_level3, 1, delta)
        one = constant_dg(square_level3, 1.0).coeffs.ravel()
        assert est.quotient(one) == pytest.approx((4 * delta - 4 * delta**2) / delta, rel=1e-6)
        assert est.constant == pytest.approx(STRIP_LEVEL3_02, rel=1e-8)

    def test_sabotaged_jump_weight_inflates_trace_constant(self):
        honest = cl.global_trace_constant(LEVEL1).constant
        sabotaged = cl.global_trace_constant(LEVEL1, jump_exponent=1.0).constant
        assert sabotaged > honest


class TestSweeps:
    def test_recorded_trace_values(self):
        sw = cl.sweep(parse_family("red:square2:levels=0..2"), "trace")
        assert sw.column("constant") == pytest.approx(TRACE_RED, rel=1e-8)
        assert sw.column("K") == pytest.approx([1 + np.sqrt(2)] * 3, rel=1e-12)

    def test_recorded_poincare_values(self):
        red = cl.sweep(parse_family("red:square2:levels=0..2"), "poincare", {"seminorm": "f1:all-boundary"})
        assert red.column("constant") == pytest.approx(POINCARE_F1_RED, rel=1e-8)
        graded = [graded_corner(2, (0.0, 0.0), d) for d in range(3)]
        sw = cl.sweep(graded, "poincare", {"seminorm": "f2:left"})
        assert sw.column("constant") == pytest.approx(POINCARE_F2_GRADED, rel=1e-8)

    def test_recorded_degenerate_values(self):
        fam = [degenerate_aspect(2, f) for f in (1, 2, 4, 8)]
        sw = cl.sweep(fam, "poincare", {"seminorm": "f1:all-boundary"})
        assert sw.column("constant") == pytest.approx(DEGENERATE_C, rel=1e-8)

    def test_parallel_matches_serial_bytes(self):
        fam = parse_family("red:square2:levels=0..1")
        a = cl.sweep(fam, "trace", jobs=1).to_csv(seed=3)
        b = cl.sweep(fam, "trace", jobs=2).to_csv(seed=3)
        assert a == b
        header, *_, footer = a.strip().splitlines()
        assert header == cl.CSV_HEADER
        assert footer.startswith("# version=0.1.0, seed=3, config-hash=")

    def test_config_hash_tracks_parameters(self):
        fam = parse_family("red:square2:levels=0..0")
        a = cl.sweep(fam, "strip", {"delta": 0.2}).config()
        b = cl.sweep(fam, "strip", {"delta": 0.1}).config()
        assert cl.config_hash(a) != cl.config_hash(b)

    def test_unknown_estimator(self):
        with pytest.raises(ValueError):
            cl.estimate(SQUARE2, "korn", {})

