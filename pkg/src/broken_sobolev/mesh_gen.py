"""Mesh families for the constant sweeps.

Quasi-uniform squares and L-shapes, red refinement (exactly similar
children), graded newest-vertex-bisection meshes (bounded shape
regularity, unbounded quasi-uniformity ratio) and flattened meshes whose
shape regularity blows up on purpose.
"""

import json
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidFactor, TargetNotVertex
from .mesh_core import build_mesh

KINDS = ("unit_square_uniform", "l_shape_uniform", "graded_corner", "degenerate_aspect")


def _grid(xs, ys, keep=None):
    """Triangulated tensor grid; ``keep(i, j)`` filters squares."""
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = lambda i, j: j * (nx + 1) + i  # noqa: E731
    cells = []
    for j in range(ny):
        for i in range(nx):
            if keep is not None and not keep(i, j):
                continue
            ll, lr, ur, ul = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            cells.append((ll, lr, ur))
            cells.append((ll, ur, ul))
    cells = np.array(cells, dtype=np.int64)
    used = np.unique(cells)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return build_mesh(verts[used], remap[cells])


def unit_square_uniform(n):
    """``n x n`` squares, each cut lower-left to upper-right."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    t = np.arange(n + 1) / n
    return _grid(t, t)


def l_shape_uniform(n):
    """``[0, 2]^2`` minus ``[1, 2]^2``, three unit blocks of ``n x n`` squares."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    t = np.arange(2 * n + 1) / n
    return _grid(t, t, keep=lambda i, j: i < n or j < n)


def degenerate_aspect(n, factor):
    """Unit square with ``n`` columns and ``factor * n`` rows of squares.

    Cells are right triangles with legs ``1/n`` and ``1/(factor n)``.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    try:
        ok = float(factor) == int(factor) and int(factor) >= 1
    except (TypeError, ValueError, OverflowError):
        ok = False
    if not ok:
        raise InvalidFactor(f"factor must be a positive integer, got {factor!r}")
    n, factor = int(n), int(factor)
    xs = np.arange(n + 1) / n
    ys = np.arange(factor * n + 1) / (factor * n)
    return _grid(xs, ys)


def refine_red(mesh):
    """Split every cell into four similar children through edge midpoints."""
    V = mesh.vertices
    N = len(V)
    mids = 0.5 * (V[mesh.edges[:, 0]] + V[mesh.edges[:, 1]])
    verts = np.vstack([V, mids])
    T = mesh.cells
    m = N + mesh.cell_edges  # midpoint opposite local vertex k
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    m_bc, m_ca, m_ab = m[:, 0], m[:, 1], m[:, 2]
    children = np.stack(
        [
            np.column_stack([a, m_ab, m_ca]),
            np.column_stack([m_ab, b, m_bc]),
            np.column_stack([m_ca, m_bc, c]),
            np.column_stack([m_ab, m_bc, m_ca]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return build_mesh(verts, children)


# ---------------------------------------------------------------------------
# newest vertex bisection


def _nvb_initial(mesh):
    """Rotate cells so the vertex opposite the refinement edge comes first."""
    L = mesh.edge_lengths[mesh.cell_edges]
    out = []
    for tri, lens in zip(mesh.cells, L):
        top = lens.max()
        cand = [k for k in range(3) if lens[k] >= top * (1 - 1e-12)]
        k = min(cand, key=lambda kk: tri[kk])
        out.append(tuple(int(v) for v in np.roll(tri, -k)))
    return out


def _nvb_sweep(verts, cells, target):
    """Bisect every cell touching ``target``, plus conforming closure."""
    ekey = lambda a, b: (a, b) if a < b else (b, a)  # noqa: E731
    marked = {ekey(c[1], c[2]) for c in cells if target in c}
    # closure: a cell with any marked edge must bisect its refinement edge
    changed = True
    while changed:
        changed = False
        for c in cells:
            ref = ekey(c[1], c[2])
            if ref in marked:
                continue
            if ekey(c[0], c[1]) in marked or ekey(c[2], c[0]) in marked:
                marked.add(ref)
                changed = True
    midpoint = {}

    def mid(a, b):
        k = ekey(a, b)
        if k not in midpoint:
            midpoint[k] = len(verts)
            verts.append(0.5 * (verts[a] + verts[b]))
        return midpoint[k]

    out = []
    stack = list(reversed(cells))
    while stack:
        t = stack.pop()
        top, b, c = t
        if ekey(b, c) not in marked:
            out.append(t)
            continue
        m = mid(b, c)
        # children keep the counterclockwise orientation
        stack.append((m, c, top))
        stack.append((m, top, b))
    return out


def bisect_towards(mesh, target, sweeps):
    """Apply ``sweeps`` newest-vertex-bisection sweeps around vertex ``target``."""
    verts = [np.array(v) for v in mesh.vertices]
    cells = _nvb_initial(mesh)
    for _ in range(sweeps):
        cells = _nvb_sweep(verts, cells, target)
    return build_mesh(np.array(verts), np.array(cells, dtype=np.int64))


def graded_corner(n, target=(0.0, 0.0), depth=1, base=None):
    """Newest-vertex-bisection mesh graded towards a vertex.

    Each depth level performs two bisection sweeps of the cells touching
    ``target``, so the cells at the target shrink by exactly one half per
    level while every cell stays similar to one of finitely many shapes.

    Parameters
    ----------
    n : int
        Size of the ``unit_square_uniform`` start mesh (ignored when
        ``base`` is given).
    target : pair of float
        Must coincide with a vertex of the start mesh.
    depth : int
        Number of grading levels; 0 returns the start mesh.
    base : Mesh, optional
        Alternative start mesh.
    """
    mesh = unit_square_uniform(n) if base is None else base
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    hit = np.flatnonzero(np.all(mesh.vertices == np.asarray(target, dtype=float), axis=1))
    if len(hit) == 0:
        raise TargetNotVertex(f"{tuple(target)} is not a mesh vertex")
    if depth == 0:
        return mesh
    return bisect_towards(mesh, int(hit[0]), 2 * int(depth))


# ---------------------------------------------------------------------------
# family specifications


@dataclass(frozen=True)
class FamilySpec:
    """One member of a mesh family.

    ``level`` counts red refinements for the uniform and degenerate kinds
    and grading depth for ``graded_corner``. ``params`` carries ``n``,
    ``factor`` and ``target`` as applicable.
    """

    kind: str
    level: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        if self.kind == "degenerate_aspect":
            f = self.params.get("factor", 1)
            if not (isinstance(f, (int, float)) and float(f) == int(f) and f > 0):
                raise InvalidFactor(f"factor must be a positive integer, got {f!r}")

    def build(self):
        p = self.params
        n = int(p.get("n", 2 if self.kind != "l_shape_uniform" else 1))
        if self.kind == "graded_corner":
            return graded_corner(n, tuple(p.get("target", (0.0, 0.0))), self.level)
        if self.kind == "unit_square_uniform":
            mesh = unit_square_uniform(n)
        elif self.kind == "l_shape_uniform":
            mesh = l_shape_uniform(n)
        else:
            mesh = degenerate_aspect(n, p.get("factor", 1))
        for _ in range(self.level):
            mesh = refine_red(mesh)
        return mesh

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else dict(text)
        return cls(d["kind"], int(d.get("level", 0)), dict(d.get("params", {})))


_BASES = {"square": "unit_square_uniform", "lshape": "l_shape_uniform"}


def _int_list(text):
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return list(range(lo, hi + 1))
    return [int(t) for t in text.split(",") if t]


def parse_family(text):
    """Parse a compact family string into a list of :class:`FamilySpec`.

    Grammar: ``<mode>:<base><n>:<key>=<values>`` with ``mode`` one of
    ``red`` (key ``levels``), ``graded`` (key ``depths``) or
    ``degenerate`` (key ``factors``); values are ``a..b`` or a comma list.
    Example: ``red:square2:levels=0..3``.
    """
    try:
        mode, base, sel = text.split(":")
        key, values = sel.split("=")
        m = re.fullmatch(r"(square|lshape)(\d+)", base)
        if m is None:
            raise ValueError
        kind, n = _BASES[m.group(1)], int(m.group(2))
        vals = _int_list(values)
    except ValueError:
        raise ValueError(f"cannot parse family {text!r}") from None
    if not vals:
        raise ValueError(f"empty selection in {text!r}")
    if mode == "red" and key == "levels":
        return [FamilySpec(kind, v, {"n": n}) for v in vals]
    if mode == "graded" and key == "depths" and kind == "unit_square_uniform":
        return [FamilySpec("graded_corner", v, {"n": n, "target": [0.0, 0.0]}) for v in vals]
    if mode == "degenerate" and key == "factors" and kind == "unit_square_uniform":
        return [FamilySpec("degenerate_aspect", 0, {"n": n, "factor": v}) for v in vals]
    raise ValueError(f"unsupported family {text!r}")
