"""Command-line driver.

Exit codes: 0 on success, 1 on runtime or validation failure (with a JSON
error object on stderr), 2 on bad arguments. The default seed is 0 unless
the ``BROKEN_SOBOLEV_SEED`` environment variable says otherwise.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .acceptance import run_suite, smooth_profile, write_suite
from .constants_lab import sweep, write_csv
from .dg_space import constant_dg, interpolate
from .errors import BrokenSobolevError
from .field_constructions import collar_field, field_validate, strip_field
from .mesh_core import build_mesh, load_mesh, mesh_regularity, save_mesh
from .mesh_gen import degenerate_aspect, graded_corner, l_shape_uniform, parse_family, refine_red, unit_square_uniform
from .shift_lab import random_lines, shift_l2_sq, shift_ratio, zigzag_bound_check

SEED_ENV = "BROKEN_SOBOLEV_SEED"


class CommandFailed(Exception):
    """Non-library failure that should exit with status 1."""

    kind = "CommandFailed"


def default_seed():
    text = os.environ.get(SEED_ENV)
    if text is None:
        return 0
    try:
        return int(text)
    except ValueError:
        raise SystemExit(f"{SEED_ENV} must be an integer, got {text!r}") from None


# -- argument types ---------------------------------------------------------


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def _family(text):
    try:
        return parse_family(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_set(text):
    try:
        vals = sorted({int(t) for t in text.split(",") if t})
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1 or max(vals) > 9:
        raise argparse.ArgumentTypeError("criteria are numbered 1..9")
    return vals


# -- helpers ----------------------------------------------------------------


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _read_mesh(path):
    if str(path).endswith(".json"):
        with open(path) as fh:
            d = json.load(fh)
        return build_mesh(np.array(d["vertices"], dtype=float), np.array(d["cells"], dtype=np.int64))
    if not (os.path.exists(path) or os.path.exists(os.path.splitext(path)[0] + ".node")):
        raise FileNotFoundError(f"no mesh at {path!r}")
    return load_mesh(path)


def _mesh_json(mesh):
    return json.dumps({"vertices": mesh.vertices.tolist(), "cells": mesh.cells.tolist()})


DOMAINS = {
    "square": lambda: unit_square_uniform(1).outer_boundary(),
    "lshape": lambda: l_shape_uniform(1).outer_boundary(),
}


# -- subcommands ------------------------------------------------------------


def cmd_mesh_gen(args):
    if args.kind == "unit-square":
        mesh = unit_square_uniform(args.n)
    elif args.kind == "lshape":
        mesh = l_shape_uniform(args.n)
    elif args.kind == "degenerate":
        mesh = degenerate_aspect(args.n, args.factor)
    else:
        mesh = graded_corner(args.n, (0.0, 0.0), args.depth)
    for _ in range(args.levels):
        mesh = refine_red(mesh)
    if str(args.output).endswith(".json"):
        _emit(_mesh_json(mesh) + "\n", args.output)
        written = [args.output]
    else:
        base = save_mesh(mesh, args.output)
        written = [base + ".node", base + ".ele"]
    print(json.dumps({"written": written, "cells": mesh.n_cells, "vertices": mesh.n_vertices}))


def cmd_mesh_info(args):
    mesh = _read_mesh(args.mesh)
    info = mesh_regularity(mesh).summary()
    info.update(
        vertices=mesh.n_vertices,
        edges=mesh.n_edges,
        boundary_edges=int(len(mesh.boundary_edges)),
        area=mesh.area(),
        hash=mesh.hash(),
    )
    print(json.dumps(info, sort_keys=True))


def cmd_mesh_convert(args):
    mesh = _read_mesh(args.input)
    if str(args.output).endswith(".json"):
        _emit(_mesh_json(mesh) + "\n", args.output)
    else:
        save_mesh(mesh, args.output)


def cmd_constants(args):
    if (args.family is None) == (args.mesh is None):
        raise argparse.ArgumentTypeError("give exactly one of --family and --mesh")
    params = {"degree": args.degree, "tol": args.tol, "seed": args.seed}
    if args.estimator == "poincare":
        if args.seminorm is None:
            raise argparse.ArgumentTypeError("poincare needs --seminorm")
        params["seminorm"] = args.seminorm
    if args.estimator == "strip":
        params["delta"] = args.delta
    if args.family is not None:
        family = args.family
    else:
        mesh = _read_mesh(args.mesh)
        family = [mesh]
    sw = sweep(family, args.estimator, params, jobs=args.jobs)
    if args.mesh is not None:
        sw.params["mesh"] = family[0].hash()
    _emit(sw.to_csv(args.seed), args.output)


def cmd_fields(args):
    poly = DOMAINS[args.domain]()
    if args.construction == "collar":
        fld = collar_field(poly)
        extra = {}
    else:
        decomp, fld = strip_field(poly, args.delta, args.alpha)
        extra = {"decomposition": decomp.summary()}
    report = field_validate(fld, seed=args.seed)
    out = {"domain": args.domain, "report": report, **extra, "field": json.loads(fld.to_json())}
    _emit(json.dumps(out, indent=2, sort_keys=True, default=float) + "\n", args.output)


def cmd_shift(args):
    direction = np.asarray(args.direction, dtype=float)
    if direction.shape != (2,) or not np.any(direction):
        raise argparse.ArgumentTypeError("--direction needs two numbers, not both zero")
    direction = direction / np.hypot(*direction)
    lines = []
    for member in args.family:
        mesh = member.build()
        u = interpolate(mesh, args.degree, smooth_profile) if args.function == "smooth" else constant_dg(mesh, 1.0, args.degree)
        for s in args.sizes:
            rho = s * direction
            lines.append(
                f"{member.level},{mesh.n_cells},{s!r},{shift_ratio(u, rho)!r},{shift_l2_sq(u, rho)!r}"
            )
    config = {
        "command": "shift",
        "family": [json.loads(f.to_json()) for f in args.family],
        "sizes": args.sizes,
        "direction": direction.tolist(),
        "function": args.function,
        "degree": args.degree,
    }
    _emit(write_csv("level,cells,rho_norm,ratio,shift_l2_sq", lines, config, args.seed), args.output)


def cmd_zigzag(args):
    lines = []
    for j, member in enumerate(args.family):
        mesh = member.build()
        for k, ln in enumerate(random_lines(mesh, args.lines, seed=[args.seed, j])):
            rep = zigzag_bound_check(mesh, ln)
            lines.append(
                f"{member.level},{k},{rep['path_sum']!r},{rep['interior_path_sum']!r},"
                f"{rep['total_sum']!r},{rep['chord']!r},{rep['bound']!r},{rep['discarded']}"
            )
    config = {"command": "zigzag", "family": [json.loads(f.to_json()) for f in args.family], "lines": args.lines}
    header = "level,line,path_sum,interior_path_sum,total_sum,chord,bound,discarded"
    _emit(write_csv(header, lines, config, args.seed), args.output)


def cmd_suite(args):
    results = run_suite(
        seed=args.seed, sabotage=args.sabotage, only=args.only,
        report=lambda r: print(r.line(), flush=True),
    )
    write_suite(results, args.outdir)
    failed = [r.number for r in results if not r.passed]
    if failed:
        raise CommandFailed(f"failing criteria: {failed}")


# -- parser -----------------------------------------------------------------


def build_parser():
    seed = default_seed()
    p = argparse.ArgumentParser(prog="broken-sobolev", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def with_seed(sp):
        sp.add_argument("--seed", type=int, default=seed, help=f"random seed (env {SEED_ENV}, default 0)")
        return sp

    mesh = sub.add_parser("mesh", help="generate, inspect or convert meshes")
    msub = mesh.add_subparsers(dest="action", required=True)
    gen = msub.add_parser("gen", help="write a generated mesh")
    gen.add_argument("--kind", required=True, choices=["unit-square", "lshape", "graded", "degenerate"])
    gen.add_argument("--n", type=_positive_int, default=2)
    gen.add_argument("--factor", type=_positive_int, default=1, help="aspect factor (degenerate)")
    gen.add_argument("--depth", type=_nonneg_int, default=1, help="grading depth (graded)")
    gen.add_argument("--levels", type=_nonneg_int, default=0, help="extra red refinements")
    gen.add_argument("-o", "--output", required=True, help="base path, or a .json file")
    gen.set_defaults(func=cmd_mesh_gen)
    info = msub.add_parser("info", help="print the regularity report as JSON")
    info.add_argument("mesh")
    info.set_defaults(func=cmd_mesh_info)
    conv = msub.add_parser("convert", help="convert between .node/.ele and JSON")
    conv.add_argument("input")
    conv.add_argument("output")
    conv.set_defaults(func=cmd_mesh_convert)

    const = sub.add_parser("constants", help="estimate inequality constants over a family")
    const.add_argument("estimator", choices=["trace", "poincare", "strip"])
    const.add_argument("--family", type=_family)
    const.add_argument("--mesh")
    const.add_argument("--seminorm", help="kind:region, e.g. f1:all-boundary")
    const.add_argument("--delta", type=_positive_float, default=0.1)
    const.add_argument("--degree", type=int, choices=[1, 2], default=1)
    const.add_argument("--tol", type=_positive_float, default=1e-9)
    const.add_argument("--jobs", type=_positive_int, default=1)
    const.add_argument("-o", "--output", default="-")
    with_seed(const).set_defaults(func=cmd_constants)

    flds = sub.add_parser("fields", help="build and validate an explicit vector field")
    flds.add_argument("construction", choices=["collar", "strip"])
    flds.add_argument("--domain", choices=sorted(DOMAINS), default="square")
    flds.add_argument("--delta", type=_positive_float, default=0.1)
    flds.add_argument("--alpha", type=float, default=0.5)
    flds.add_argument("-o", "--output", default="-")
    with_seed(flds).set_defaults(func=cmd_fields)

    sh = sub.add_parser("shift", help="shift ratio against |rho| and level")
    sh.add_argument("--family", type=_family, default=parse_family("red:square2:levels=0..3"))
    sh.add_argument("--sizes", type=_float_list, default=[0.1, 0.05, 0.025])
    sh.add_argument("--direction", type=_float_list, default=[1.0, 1.0])
    sh.add_argument("--function", choices=["smooth", "one"], default="smooth")
    sh.add_argument("--degree", type=int, choices=[1, 2], default=1)
    sh.add_argument("-o", "--output", default="-")
    with_seed(sh).set_defaults(func=cmd_shift)

    zz = sub.add_parser("zigzag", help="line-cut path lengths against their bound")
    zz.add_argument("--family", type=_family, default=parse_family("red:square2:levels=0..3"))
    zz.add_argument("--lines", type=_positive_int, default=100)
    zz.add_argument("-o", "--output", default="-")
    with_seed(zz).set_defaults(func=cmd_zigzag)

    suite = sub.add_parser("suite", help="run the acceptance battery")
    suite.add_argument("outdir")
    suite.add_argument("--only", type=_int_set, help="comma-separated criterion numbers")
    suite.add_argument("--sabotage", action="store_true", help="weight jumps by |e| (negative control)")
    with_seed(suite).set_defaults(func=cmd_suite)
    return p


def _fail(exc, code):
    kind = getattr(exc, "kind", type(exc).__name__)
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        return _fail(exc, 2)
    except (BrokenSobolevError, CommandFailed, OSError, ValueError, RuntimeError) as exc:
        return _fail(exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
