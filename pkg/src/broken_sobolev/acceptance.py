"""Acceptance battery: nine pass/fail experiments with CSV evidence.

Each ``criterion_*`` function returns a :class:`CriterionResult` holding
its headline value, the threshold it is compared against and the CSV text
that records the underlying numbers. :func:`run_suite` runs a selection
and :func:`write_suite` stores the CSVs plus ``summary.json``.

The ``sabotage`` flag switches the jump weight from ``|e|^-1`` to ``|e|``
in every constant estimate; it exists as a negative control and is
expected to break the stability criteria.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .broken_norms import Bump, ibp_residual, norm_breakdown, trace_identity_residual
from .constants_lab import CSV_HEADER, element_trace_constant, strip_constant, sweep, write_csv
from .dg_space import DGFunction, constant_dg, interpolate, random_dg
from .field_constructions import collar_field, field_validate, strip_field
from .mesh_core import build_mesh, mesh_regularity
from .mesh_gen import l_shape_uniform, parse_family, refine_red, unit_square_uniform
from .reference import element_trace_reference, linear_norms
from .shift_lab import bound_coefficient, random_lines, shift_l2_sq, shift_ratio, trim_path, zigzag_bound_check

BAND = 2.0
SABOTAGE_EXPONENT = 1.0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    value: float
    threshold: float
    csv: str = ""
    detail: dict = field(default_factory=dict)
    sense: str = "<="  # how value must compare with threshold

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"

    def line(self):
        return f"[{self.status}] criterion {self.number} {self.name}: value={self.value:.6g} (required {self.sense} {self.threshold:.6g})"

    def summary(self):
        return {
            "criterion": self.number,
            "name": self.name,
            "status": self.status,
            "value": float(self.value),
            "threshold": float(self.threshold),
            "sense": self.sense,
        }


def _constant_params(sabotage, **extra):
    params = dict(extra)
    if sabotage:
        params["jump_exponent"] = SABOTAGE_EXPONENT
    return params


def _random_triangle(rng, min_angle=np.pi / 12):
    while True:
        tri = rng.uniform(-1, 1, size=(3, 2)) * rng.uniform(0.01, 10)
        tri += rng.uniform(-5, 5, size=2)
        reg = mesh_regularity(build_mesh(tri, [[0, 1, 2]]))
        if reg.theta_K >= min_angle:
            return build_mesh(tri, [[0, 1, 2]])


def criterion_exactness(seed=0, sabotage=False, n=200):
    """Closed-form norms of constants and linears, element trace constant against the oracle."""
    rng = np.random.default_rng(seed)
    norm_err = trace_err = 0.0
    lines = []
    for i in range(n):
        mesh = _random_triangle(rng)
        tri = mesh.cell_coords[0]
        c = rng.uniform(-2, 2)
        nb = norm_breakdown(constant_dg(mesh, c))
        area = mesh.area()
        want = [c * c * area, 0.0, 0.0, c * c * mesh.boundary_length()]
        got = [nb.l2_sq, nb.broken_h1_sq, nb.jump_sq, nb.boundary_l2_sq]
        errs = [abs(g - w) / max(abs(w), 1e-300) if w else abs(g) for g, w in zip(got, want)]
        vals = rng.uniform(-2, 2, size=3)
        u = DGFunction(mesh, 1, vals[None, :])
        l2, h1, edges = linear_norms(tri, vals)
        nb = norm_breakdown(u)
        for g, w in ((nb.l2_sq, l2), (nb.broken_h1_sq, h1), (nb.boundary_l2_sq, sum(edges))):
            errs.append(abs(g - w) / abs(w))
        edge = int(rng.integers(3))
        degree = 1 + (i % 2)
        lib = element_trace_constant(tri, edge, degree).constant
        ora = element_trace_reference(tri, edge, degree)
        terr = abs(lib - ora) / abs(ora)
        norm_err = max(norm_err, max(errs))
        trace_err = max(trace_err, terr)
        lines.append(f"{i},{degree},{edge},{max(errs)!r},{lib!r},{ora!r},{terr!r}")
    csv = write_csv(
        "triangle,degree,edge,norm_rel_error,trace_lib,trace_oracle,trace_rel_error",
        lines, {"criterion": 1, "n": n}, seed,
    )
    passed = norm_err <= 1e-12 and trace_err <= 1e-9
    return CriterionResult(
        1, "exactness-oracle", passed, max(norm_err, trace_err), 1e-12, csv,
        {"norm_rel_error": norm_err, "trace_rel_error": trace_err},
    )


def _sweep_lines(tag, sw):
    return [f"{tag},{r.csv()}" for r in sw.rows]


def criterion_trace_stability(seed=0, sabotage=False):
    fam = parse_family("red:square2:levels=0..4")
    sw = sweep(fam, "trace", _constant_params(sabotage, seed=seed))
    K = sw.column("K")
    k_const = bool(np.all(np.abs(K - K[0]) <= 1e-12 * K[0]))
    band = sw.band()
    csv = write_csv("family," + CSV_HEADER, _sweep_lines("red", sw), sw.config(), seed)
    return CriterionResult(
        2, "trace-stability", band <= BAND and k_const, band, BAND, csv,
        {"K_spread": float(K.max() - K.min()), "constants": sw.column("constant").tolist()},
    )


POINCARE_SEMINORMS = ("f1:all-boundary", "f2:left", "f3:all")
POINCARE_FAMILIES = ("red:square2:levels=0..4", "graded:square2:depths=0..6")


def criterion_poincare_stability(seed=0, sabotage=False):
    lines, bands, qu_growth = [], {}, []
    for fam_text in POINCARE_FAMILIES:
        fam = parse_family(fam_text)
        for sn in POINCARE_SEMINORMS:
            sw = sweep(fam, "poincare", _constant_params(sabotage, seminorm=sn, seed=seed))
            bands[f"{fam_text}|{sn}"] = sw.band()
            lines += _sweep_lines(f"{fam_text.split(':')[0]}|{sn}", sw)
            if fam_text.startswith("graded") and sn == POINCARE_SEMINORMS[0]:
                qu = sw.column("qu")
                qu_growth = (qu[1:] / qu[:-1]).tolist()
    worst = max(bands.values())
    grows = bool(qu_growth) and min(qu_growth) >= 2.0
    csv = write_csv("family|seminorm," + CSV_HEADER, lines, {"criterion": 3, "sabotage": sabotage}, seed)
    return CriterionResult(
        3, "poincare-stability", worst <= BAND and grows, worst, BAND, csv,
        {"bands": bands, "quasi_uniformity_growth": qu_growth},
    )


def criterion_degenerate_control(seed=0, sabotage=False):
    fam = parse_family("degenerate:square2:factors=1,2,4,8,16")
    sw = sweep(fam, "poincare", _constant_params(sabotage, seminorm="f1:all-boundary", seed=seed))
    K, C = sw.column("K"), sw.column("constant")
    k_up = bool(np.all(np.diff(K) > 0))
    c_up = bool(np.all(np.diff(C) > 0))
    lines = [f"{f.params['factor']},{r.csv()}" for f, r in zip(fam, sw.rows)]
    csv = write_csv("factor," + CSV_HEADER, lines, sw.config(), seed)
    # value: smallest successive growth ratio of the constant (must exceed 1)
    growth = float(np.min(C[1:] / C[:-1]))
    return CriterionResult(
        4, "degenerate-control", k_up and c_up, growth, 1.0, csv,
        {"K": K.tolist(), "constant": C.tolist()}, sense=">",
    )


STRIP_DELTAS = (0.2, 0.1, 0.05, 0.025)


def criterion_strip(seed=0, sabotage=False):
    mesh = unit_square_uniform(2)
    for _ in range(3):
        mesh = refine_red(mesh)
    params = _constant_params(sabotage, seed=seed)
    jexp = params.get("jump_exponent", -1.0)
    vals, errs, lines = [], [], []
    one = constant_dg(mesh, 1.0).vector()
    for d in STRIP_DELTAS:
        est = strip_constant(mesh, 1, d, jump_exponent=jexp, seed=seed)
        q = est.quotient(one)
        want = (4 * d - 4 * d * d) / d
        vals.append(est.constant)
        errs.append(abs(q - want))
        lines.append(f"{d!r},{est.constant!r},{q!r},{want!r},{est.result.iterations},{est.result.residual!r}")
    band = max(vals) / min(vals)
    csv = write_csv("delta,constant,quotient_one,expected_one,iters,residual", lines,
                    {"criterion": 5, "deltas": STRIP_DELTAS, "sabotage": sabotage}, seed)
    return CriterionResult(
        5, "strip-lemma", band <= BAND and max(errs) <= 1e-6, band, BAND, csv,
        {"constant_one_error": max(errs)},
    )


SHIFT_SIZES = (0.1, 0.05, 0.025)


def smooth_profile(p):
    """Fixed smooth function that does not vanish on the boundary."""
    return np.exp(p[:, 0]) * np.cos(p[:, 1]) + p[:, 0] * p[:, 1]


def criterion_shift(seed=0, sabotage=False):
    mesh = unit_square_uniform(2)
    direction = np.array([1.0, 1.0]) / np.sqrt(2.0)
    ratios, lines = [], []
    for level in range(4):
        u = interpolate(mesh, 1, smooth_profile)
        for s in SHIFT_SIZES:
            r = shift_ratio(u, s * direction)
            ratios.append(r)
            lines.append(f"{level},{mesh.n_cells},{s!r},{r!r}")
        mesh = refine_red(mesh)
    band = max(ratios) / min(ratios)
    one = constant_dg(unit_square_uniform(16), 1.0)
    exact = shift_ratio(one, (0.1, 0.0))
    approx = shift_l2_sq(one, (0.1, 0.0), method="subdivision") / 0.1
    one_err = max(abs(exact - 2) / 2, abs(approx - 2) / 2)
    lines.append(f"one,{one.mesh.n_cells},0.1,{exact!r}")
    lines.append(f"one-subdivision,{one.mesh.n_cells},0.1,{approx!r}")
    csv = write_csv("level,cells,rho_norm,ratio", lines, {"criterion": 6, "sizes": SHIFT_SIZES}, seed)
    return CriterionResult(
        6, "shift-continuity", band <= BAND and one_err <= 0.02, band, BAND, csv,
        {"constant_ratio_rel_error": one_err},
    )


LINE_FAMILIES = (
    "red:square2:levels=0..3",
    "red:lshape1:levels=0..3",
    "graded:square2:depths=0..6",
    "degenerate:square2:factors=1,2,4,8,16",
)


def criterion_zigzag(seed=0, sabotage=False, n_lines=100):
    lines, violations, worst = [], 0, 0.0
    for fi, fam_text in enumerate(LINE_FAMILIES):
        fam = parse_family(fam_text)
        meshes = [f.build() for f in fam]
        rng = np.random.default_rng([seed, fi])
        picks = rng.integers(len(meshes), size=n_lines)
        for j in range(len(meshes)):
            want = int(np.sum(picks == j))
            if not want:
                continue
            mesh = meshes[j]
            for k, ln in enumerate(random_lines(mesh, want, seed=[seed, fi, j])):
                try:
                    rep = zigzag_bound_check(mesh, ln)
                except AssertionError:
                    violations += 1
                    path = trim_path(mesh, ln)
                    bound = bound_coefficient(path.theta_K) * path.chord_length
                    rep = {"interior_path_sum": float("nan"), "bound": bound, "total_sum": float("nan")}
                ratio = rep["interior_path_sum"] / rep["bound"] if rep["bound"] > 0 else 0.0
                worst = max(worst, ratio)
                lines.append(
                    f"{fam_text},{j},{k},{rep['interior_path_sum']!r},{rep['bound']!r},{rep['total_sum']!r}"
                )
    csv = write_csv("family,member,line,interior_path_sum,bound,total_sum", lines,
                    {"criterion": 7, "families": LINE_FAMILIES, "n": n_lines}, seed)
    return CriterionResult(
        7, "zigzag-bound", violations == 0, float(violations), 0.0, csv,
        {"worst_ratio_to_bound": worst},
    )


FIELD_CASES = (("square", 0.1), ("lshape", 0.1))


def _domain_mesh(name):
    return unit_square_uniform(4) if name == "square" else l_shape_uniform(2)


def _collar_sup(patch):
    """``max(|OA|, |OB|) / H`` with ``H`` the distance from the apex ``O`` to line ``AB``."""
    a, b, o = (np.asarray(v, dtype=float) for v in (patch.a, patch.b, patch.apex))
    ab = b - a
    H = abs(ab[0] * (o - a)[1] - ab[1] * (o - a)[0]) / np.hypot(*ab)
    return max(np.hypot(*(a - o)), np.hypot(*(b - o))) / H


VALIDATE_TOL = 1e-10
RESIDUAL_TOL = 1e-6


def criterion_fields(seed=0, sabotage=False, n_functions=50):
    """Field certificates on both domains plus identity residuals on random functions.

    The headline value is the largest fraction of its tolerance that any
    check uses, so it passes at ``<= 1``.
    """
    lines = []
    sup_ok_all = True
    worst_validate = worst_residual = 0.0
    for name, delta in FIELD_CASES:
        mesh = _domain_mesh(name)
        poly = mesh.outer_boundary()
        collar = collar_field(poly)
        _, strip = strip_field(poly, delta)
        for fld in (collar, strip):
            rep = field_validate(fld, seed=seed)
            errs = [rep["div_error"], rep["normal_jump"]]
            if fld.kind == "collar":
                errs.append(rep["boundary_flux_error"])
                sup_ok = rep["sup_sampled"] <= rep["sup_phi"] * (1 + 1e-12) and all(
                    abs(p.sup() - _collar_sup(p)) <= 1e-12 * _collar_sup(p) for p in fld.patches
                )
            else:
                errs.append(rep["inner_boundary_max"])
                sup_ok = all(v["ok"] for v in rep["vertices"]) and rep["sup_sampled"] <= rep["sup_phi"] * (1 + 1e-9)
            sup_ok_all &= sup_ok
            worst_validate = max(worst_validate, max(errs))
            lines.append(f"{name},{fld.kind},validate,{max(errs)!r},{rep['sup_phi']!r},{int(sup_ok)}")
        center = np.array([0.5, 0.5])
        for i in range(n_functions):
            u = random_dg(mesh, 1 + i % 2, seed=[seed, i])
            tr = max(abs(trace_identity_residual(u, collar)), abs(trace_identity_residual(u, strip)))
            ib = abs(ibp_residual(u, Bump(center, 0.45), component=i % 2, levels=4))
            worst_residual = max(worst_residual, tr, ib)
            lines.append(f"{name},random{i},residuals,{tr!r},{ib!r},1")
    csv = write_csv("domain,field,check,error,extra,ok", lines,
                    {"criterion": 8, "cases": FIELD_CASES, "n": n_functions}, seed)
    used = max(worst_validate / VALIDATE_TOL, worst_residual / RESIDUAL_TOL)
    return CriterionResult(
        8, "field-certification", bool(sup_ok_all) and used <= 1.0, used, 1.0, csv,
        {"validate_error": worst_validate, "residual": worst_residual, "sup_ok": bool(sup_ok_all)},
    )


CRITERIA = {
    1: criterion_exactness,
    2: criterion_trace_stability,
    3: criterion_poincare_stability,
    4: criterion_degenerate_control,
    5: criterion_strip,
    6: criterion_shift,
    7: criterion_zigzag,
    8: criterion_fields,
}


def criterion_determinism(first, seed=0, sabotage=False):
    """Rerun every criterion in ``first`` and compare the CSV bytes."""
    diffs = []
    lines = []
    for res in first:
        again = CRITERIA[res.number](seed=seed, sabotage=sabotage)
        same = again.csv.encode() == res.csv.encode()
        if not same:
            diffs.append(res.number)
        lines.append(f"{res.number},{len(res.csv.encode())},{int(same)}")
    csv = write_csv("criterion,bytes,identical", lines, {"criterion": 9}, seed)
    return CriterionResult(9, "determinism", not diffs, float(len(diffs)), 0.0, csv, {"differing": diffs})


def run_suite(seed=0, sabotage=False, only=None, report=None):
    """Run the selected criteria (all by default); criterion 9 reruns the others."""
    wanted = sorted(only) if only else list(range(1, 10))
    results = []
    for k in wanted:
        if k == 9:
            continue
        res = CRITERIA[k](seed=seed, sabotage=sabotage)
        results.append(res)
        if report:
            report(res)
    if 9 in wanted:
        base = results or [CRITERIA[k](seed=seed, sabotage=sabotage) for k in CRITERIA]
        res = criterion_determinism(base, seed, sabotage)
        results.append(res)
        if report:
            report(res)
    return results


def write_suite(results, outdir):
    os.makedirs(outdir, exist_ok=True)
    for res in results:
        with open(os.path.join(outdir, f"criterion{res.number}_{res.name}.csv"), "w", newline="") as fh:
            fh.write(res.csv)
    summary = {"version": __version__, "criteria": [r.summary() for r in results]}
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
