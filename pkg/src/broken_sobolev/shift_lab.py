"""Shift continuity of zero-extended DG functions and line-cut edge paths.

``shift_l2_sq`` measures ``int_R2 (u~(x + rho) - u~(x))^2`` where ``u~`` is
``u`` extended by zero. Its default route is exact: expanding the square
gives ``2 ||u||^2 - 2 int u(x) u~(x + rho)``, and the cross term is a sum of
polynomial integrals over the convex overlaps ``K cap (K' - rho)``.

The line-cut part collects the mesh edges crossed by a straight line,
trims them into a connected zigzag path and checks the length bound
``sum_{interior path edges} |e| <= sqrt(2 / (1 - cos theta_K)) |l cap Omega|``.
"""

import json
from dataclasses import dataclass

import numpy as np

from .broken_norms import norm_breakdown
from .dg_space import OUTSIDE, CellGrid, barycentric
from .errors import BoundViolated, LineHitsVertex, ZeroFunction, ZeroShift
from .geometry import clip_convex
from .mesh_core import mesh_regularity
from .quadrature import integrate_polygon_rule, subdivided_triangle_rule, triangles_rule

VERTEX_TOL = 1e-10


def _rho(rho):
    rho = np.asarray(rho, dtype=float).reshape(2)
    if not np.any(rho):
        raise ZeroShift("shift vector must be nonzero")
    return rho


def _overlay_cross(u, rho):
    """``int u(x) u~(x + rho) dx`` by exact overlay of the mesh with its translate."""
    mesh = u.mesh
    grid = CellGrid(mesh)
    coords = mesh.cell_coords
    total = 0.0
    for k in range(mesh.n_cells):
        moved = coords[k] + rho  # cell k translated: its points x + rho
        cand = grid.candidates_box(moved.min(axis=0), moved.max(axis=0))
        for j in cand:
            poly = clip_convex(coords[j], moved)
            if len(poly) < 3:
                continue
            y, w = integrate_polygon_rule(poly, 4)
            # y lies in cell j; y - rho lies in cell k
            uk = u.eval_points(np.full(len(y), k), y - rho)
            uj = u.eval_points(np.full(len(y), j), y)
            total += float(np.sum(w * uk * uj))
    return total


def _subdivision_value(u, rho, depth):
    mesh = u.mesh
    lam, w = subdivided_triangle_rule(4, depth)
    pts, wts = triangles_rule(mesh.cell_coords, lam, w)
    cells = np.repeat(np.arange(mesh.n_cells), len(w))
    here = u.eval_points(cells, pts)
    grid = CellGrid(mesh)
    fwd = grid.locate_many(pts + rho)
    there = np.zeros(len(pts))
    hit = fwd != OUTSIDE
    if hit.any():
        there[hit] = u.cell_values(fwd[hit], barycentric(mesh, fwd[hit], pts[hit] + rho))
    # part of the translated support that lies outside the domain
    back_out = grid.locate_many(pts - rho) == OUTSIDE
    return float(np.sum(wts * (there - here) ** 2) + np.sum(wts * here**2 * back_out))


def shift_l2_sq(u, rho, method="overlay", depth=3):
    """``int_R2 (u~(x + rho) - u~(x))^2 dx``.

    Parameters
    ----------
    method : {"overlay", "subdivision"}
        ``overlay`` is exact up to rounding. ``subdivision`` applies a
        degree-4 rule on ``4**depth`` subtriangles per cell, integrating
        across the translated edges without resolving them; see
        :func:`shift_quadrature_estimate` for its error estimate.
    """
    rho = _rho(rho)
    if method == "overlay":
        l2 = norm_breakdown(u).l2_sq
        return max(0.0, 2.0 * l2 - 2.0 * _overlay_cross(u, rho))
    if method == "subdivision":
        return _subdivision_value(u, rho, int(depth))
    raise ValueError(f"unknown method {method!r}")


def shift_quadrature_estimate(u, rho, depth=3):
    """Subdivision value at ``depth`` with ``|Q(depth) - Q(depth + 1)|`` as error estimate."""
    rho = _rho(rho)
    q0 = _subdivision_value(u, rho, depth)
    q1 = _subdivision_value(u, rho, depth + 1)
    return q0, abs(q1 - q0)


def shift_ratio(u, rho, method="overlay"):
    """``shift_l2_sq / (|rho| ||u||^2)`` with the broken norm."""
    rho = _rho(rho)
    nrm = norm_breakdown(u).h1h_norm_sq
    if nrm <= 0:
        raise ZeroFunction("u vanishes identically")
    return shift_l2_sq(u, rho, method) / (float(np.hypot(*rho)) * nrm)


# ---------------------------------------------------------------------------
# line cuts


@dataclass(frozen=True)
class Line:
    point: tuple
    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = float(np.hypot(*d))
        if n == 0:
            raise ValueError("direction must be nonzero")
        object.__setattr__(self, "point", tuple(float(c) for c in self.point))
        object.__setattr__(self, "direction", tuple(float(c) for c in d / n))

    @classmethod
    def horizontal(cls, y):
        return cls((0.0, float(y)), (1.0, 0.0))

    @classmethod
    def through(cls, p, q):
        return cls(p, np.subtract(q, p))

    def side(self, points):
        """Signed distance, positive to the left of the direction ("above")."""
        p = np.asarray(self.point)
        d = np.asarray(self.direction)
        rel = np.atleast_2d(points) - p
        return d[0] * rel[:, 1] - d[1] * rel[:, 0]

    def param(self, points):
        rel = np.atleast_2d(points) - np.asarray(self.point)
        return rel @ np.asarray(self.direction)


def _crossings(mesh, line, tol=VERTEX_TOL):
    s = line.side(mesh.vertices)
    if np.any(np.abs(s) < tol):
        k = int(np.argmin(np.abs(s)))
        raise LineHitsVertex(f"line passes within {tol} of vertex {k}")
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    cross = np.flatnonzero(s[a] * s[b] < 0)
    lam = s[a[cross]] / (s[a[cross]] - s[b[cross]])
    va, vb = mesh.vertices[a[cross]], mesh.vertices[b[cross]]
    t = line.param(va + lam[:, None] * (vb - va))
    return cross, t


def line_cut_edges(mesh, line):
    """Edges whose interiors the line crosses, in increasing edge index."""
    cross, _ = _crossings(mesh, line)
    return cross


@dataclass(frozen=True)
class CutPath:
    edges: tuple
    discarded: tuple
    theta_K: float
    chord_length: float
    chords: tuple
    crossing: tuple

    def to_json(self):
        return json.dumps(
            {
                "edges": list(self.edges),
                "discarded": list(self.discarded),
                "theta_K": self.theta_K,
                "chord_length": self.chord_length,
                "chords": [list(c) for c in self.chords],
            }
        )


def _trim_chord(mesh, seq):
    """Keep the first edge, then the last edge of every fan of consecutive edges."""
    ends = [set(map(int, mesh.edges[e])) for e in seq]
    kept = [seq[0]]
    i, m = 0, len(seq) - 1
    while i < m:
        shared = ends[i] & ends[i + 1]
        if len(shared) != 1:
            raise RuntimeError("consecutive crossing edges do not share a vertex")
        (v,) = shared
        j = i + 1
        while j < m and v in ends[j + 1]:
            j += 1
        kept.append(seq[j])
        i = j
    return kept


def trim_path(mesh, line):
    """Connected zigzag sub-path of the crossed edges, chord by chord.

    Crossed edges are ordered by the line parameter. Along each chord of
    ``l cap Omega`` the leftmost edge is kept; consecutive edges meeting
    at a common vertex form a fan around that vertex, of which only the
    last (rightmost) one is kept so the walk continues from its far end.
    """
    cross, t = _crossings(mesh, line)
    order = np.argsort(t, kind="stable")
    seq = [int(e) for e in cross[order]]
    ts = t[order]
    boundary = mesh.edge_cells[:, 1] < 0
    chords, kept = [], []
    start = None
    for k, e in enumerate(seq):
        if not boundary[e]:
            continue
        if start is None:
            start = k
        else:
            chords.append((float(ts[start]), float(ts[k])))
            kept.extend(_trim_chord(mesh, seq[start : k + 1]))
            start = None
    if start is not None:
        raise RuntimeError("line enters the domain without leaving it")
    kept_set = set(kept)
    discarded = tuple(sorted(e for e in seq if e not in kept_set))
    reg = mesh_regularity(mesh)
    return CutPath(
        tuple(kept), discarded, float(reg.theta_K),
        float(sum(b - a for a, b in chords)), tuple(chords), tuple(seq),
    )


def bound_coefficient(theta):
    """``sqrt(2 / (1 - cos theta))``: ``a + b <= coefficient * c`` in a triangle with angles >= theta."""
    return float(np.sqrt(2.0 / (1.0 - np.cos(theta))))


def zigzag_bound_check(mesh, line):
    """Lengths of the trimmed path against the regularity bound.

    Raises
    ------
    BoundViolated
        The interior path edges are longer than the bound allows.
    """
    path = trim_path(mesh, line)
    L = mesh.edge_lengths
    interior = mesh.edge_cells[:, 1] >= 0
    kept = np.array(path.edges, dtype=np.int64)
    path_sum = float(L[kept].sum()) if len(kept) else 0.0
    inner_sum = float(L[kept[interior[kept]]].sum()) if len(kept) else 0.0
    total = float(L[list(path.crossing)].sum()) if path.crossing else 0.0
    coef = bound_coefficient(path.theta_K)
    bound = coef * path.chord_length
    report = {
        "path_sum": path_sum,
        "interior_path_sum": inner_sum,
        "total_sum": total,
        "chord": path.chord_length,
        "coefficient": coef,
        "bound": bound,
        "ratio_total_over_path": total / path_sum if path_sum > 0 else float("nan"),
        "retained": len(path.edges),
        "discarded": len(path.discarded),
    }
    if inner_sum > bound * (1 + 1e-12) + 1e-14:
        raise BoundViolated(f"interior path length {inner_sum} exceeds bound {bound}")
    return report


def random_lines(mesh, n, seed=0, max_tries=100):
    """``n`` lines through uniformly drawn interior points that avoid every vertex."""
    rng = np.random.default_rng(seed)
    areas = mesh.cell_areas / mesh.cell_areas.sum()
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries * n:
            raise RuntimeError("could not draw vertex-free lines")
        c = rng.choice(mesh.n_cells, p=areas)
        r1, r2 = rng.random(2)
        if r1 + r2 > 1:
            r1, r2 = 1 - r1, 1 - r2
        tri = mesh.cell_coords[c]
        p = tri[0] + r1 * (tri[1] - tri[0]) + r2 * (tri[2] - tri[0])
        ang = rng.uniform(0, np.pi)
        line = Line(p, (np.cos(ang), np.sin(ang)))
        if np.min(np.abs(line.side(mesh.vertices))) < 1e3 * VERTEX_TOL:
            continue
        out.append(line)
    return out


def shift_report(u, rho, depth=3):
    """Exact shift value next to the subdivision estimate, as a JSON-ready dict."""
    rho = _rho(rho)
    exact = shift_l2_sq(u, rho)
    approx, err = shift_quadrature_estimate(u, rho, depth)
    nrm = norm_breakdown(u).h1h_norm_sq
    return {
        "rho": [float(r) for r in rho],
        "shift_l2_sq": exact,
        "subdivision": approx,
        "subdivision_error_estimate": err,
        "ratio": exact / (float(np.hypot(*rho)) * nrm) if nrm > 0 else float("nan"),
    }
