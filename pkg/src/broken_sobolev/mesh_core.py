"""Conforming triangular meshes, shape-regularity metrics and mesh files.

A :class:`Mesh` is immutable once built. All connectivity is derived in
:func:`build_mesh`:

* ``edges`` : ``(E, 2)`` vertex pairs with ``edges[:, 0] < edges[:, 1]``,
  sorted lexicographically;
* ``edge_cells`` : ``(E, 2)`` incident cells, lower index first, ``-1`` in
  the second slot for boundary edges;
* ``edge_normals`` : ``(E, 2, 2)`` unit normal pointing out of each side
  cell (zeros for the missing side of a boundary edge);
* ``cell_edges`` : ``(M, 3)`` edge index opposite local vertex ``k``.
"""

import hashlib
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateCell, DuplicateVertex, NonConforming, ParseError
from .geometry import cross2, polygon_area

INTERIOR = "interior"
BOUNDARY = "boundary"


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("point coordinates must be finite")

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y], dtype=dtype or float)


@dataclass(frozen=True)
class Edge:
    """Read-only view of one mesh edge."""

    index: int
    endpoints: tuple
    length: float
    side_cells: tuple
    unit_normals: tuple
    kind: str


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    edge_cells: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    cell_edges: np.ndarray
    boundary_polygon: tuple = field(default=())

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def interior_edges(self):
        return np.flatnonzero(self.edge_cells[:, 1] >= 0)

    @cached_property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    @cached_property
    def cell_coords(self):
        """``(M, 3, 2)`` vertex coordinates of every cell."""
        return self.vertices[self.cells]

    @cached_property
    def cell_areas(self):
        c = self.cell_coords
        return 0.5 * cross2(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def cell_diameters(self):
        return self.edge_lengths[self.cell_edges].max(axis=1)

    @cached_property
    def vertex_cells(self):
        """List of incident cells for every vertex."""
        star = [[] for _ in range(self.n_vertices)]
        for c, tri in enumerate(self.cells):
            for v in tri:
                star[v].append(c)
        return tuple(tuple(s) for s in star)

    @cached_property
    def cell_neighbors(self):
        """``(M, 3)`` neighbour across local edge ``k`` or ``-1``."""
        nb = np.full((self.n_cells, 3), -1, dtype=np.int64)
        ec = self.edge_cells[self.cell_edges]  # (M, 3, 2)
        me = np.arange(self.n_cells)[:, None]
        other = np.where(ec[..., 0] == me, ec[..., 1], ec[..., 0])
        nb[:] = other
        return nb

    @cached_property
    def cell_jacobian_inverse(self):
        """``(M, 2, 2)`` inverse of ``[v1 - v0, v2 - v0]`` per cell."""
        c = self.cell_coords
        J = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=2)
        return np.linalg.inv(J)

    @cached_property
    def lambda_gradients(self):
        """``(M, 3, 2)`` constant gradients of the barycentric coordinates."""
        Ji = self.cell_jacobian_inverse
        g1, g2 = Ji[:, 0, :], Ji[:, 1, :]
        return np.stack([-g1 - g2, g1, g2], axis=1)

    @cached_property
    def edge_local_vertices(self):
        """``(E, 2, 2)`` local position, in each side cell, of the edge endpoints.

        Entry ``[e, s, k]`` is the local vertex index of ``edges[e, k]`` in
        ``edge_cells[e, s]``; ``-1`` for a missing side.
        """
        out = np.full((self.n_edges, 2, 2), -1, dtype=np.int64)
        for s in range(2):
            c = self.edge_cells[:, s]
            has = c >= 0
            tri = self.cells[c[has]]
            for k in range(2):
                v = self.edges[has, k]
                out[has, s, k] = np.argmax(tri == v[:, None], axis=1)
        return out

    def edge(self, i):
        a, b = (int(v) for v in self.edges[i])
        c0, c1 = (int(c) for c in self.edge_cells[i])
        sides = (c0,) if c1 < 0 else (c0, c1)
        normals = tuple(tuple(self.edge_normals[i, k]) for k in range(len(sides)))
        return Edge(
            index=int(i),
            endpoints=(a, b),
            length=float(self.edge_lengths[i]),
            side_cells=sides,
            unit_normals=normals,
            kind=BOUNDARY if c1 < 0 else INTERIOR,
        )

    def hash(self):
        """Content hash of vertices and cells (hex, 16 chars)."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.cells, dtype="<i8").tobytes())
        return h.hexdigest()[:16]

    def area(self):
        return float(self.cell_areas.sum())

    def boundary_length(self):
        return float(self.edge_lengths[self.boundary_edges].sum())

    def outer_boundary(self):
        """Coordinates of the outer (largest, CCW) boundary loop."""
        loops = [self.vertices[list(lp)] for lp in self.boundary_polygon]
        areas = [polygon_area(p) for p in loops]
        return loops[int(np.argmax(areas))]


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def build_mesh(vertices, cells):
    """Validate a vertex/cell list and derive all connectivity.

    Parameters
    ----------
    vertices : array_like, shape (N, 2)
    cells : array_like of int, shape (M, 3)
        Vertex indices; clockwise cells are reoriented.

    Returns
    -------
    Mesh

    Raises
    ------
    NonConforming
        An edge has more than two cells, a hanging node sits on an edge,
        or two cells fold over each other.
    DuplicateVertex
        Two vertices have identical coordinates.
    DegenerateCell
        A cell has zero area.
    """
    V = np.array(vertices, dtype=float)
    T = np.array(cells, dtype=np.int64)
    if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
        raise ValueError("need at least 3 vertices of shape (N, 2)")
    if T.ndim != 2 or T.shape[1] != 3 or len(T) < 1:
        raise ValueError("need at least one cell of shape (M, 3)")
    if not np.all(np.isfinite(V)):
        raise ValueError("vertex coordinates must be finite")
    if T.min() < 0 or T.max() >= len(V):
        raise ValueError("cell vertex index out of range")
    if np.any(T[:, 0] == T[:, 1]) or np.any(T[:, 1] == T[:, 2]) or np.any(T[:, 0] == T[:, 2]):
        raise DegenerateCell("cell repeats a vertex")

    uniq = np.unique(V, axis=0)
    if len(uniq) != len(V):
        raise DuplicateVertex("two vertices share identical coordinates")

    P = V[T]
    sa = cross2(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    scale = np.max(np.abs(P - P[:, :1]), axis=(1, 2)) ** 2
    if np.any(np.abs(sa) <= 1e-14 * scale):
        bad = int(np.flatnonzero(np.abs(sa) <= 1e-14 * scale)[0])
        raise DegenerateCell(f"cell {bad} has zero area")
    cw = sa < 0
    T[cw] = T[cw][:, [0, 2, 1]]

    # local edge k is opposite local vertex k
    half = np.stack([T[:, [1, 2]], T[:, [2, 0]], T[:, [0, 1]]], axis=1)  # (M,3,2)
    flat = half.reshape(-1, 2)
    key = np.sort(flat, axis=1)
    edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        e = int(np.flatnonzero(counts > 2)[0])
        raise NonConforming(f"edge {tuple(edges[e])} is shared by {counts[e]} cells")

    E = len(edges)
    cell_of = np.repeat(np.arange(len(T)), 3)
    edge_cells = np.full((E, 2), -1, dtype=np.int64)
    forward = np.zeros((E, 2), dtype=bool)
    order = np.argsort(inverse, kind="stable")
    inv_sorted = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = inv_sorted[1:] != inv_sorted[:-1]
    slot = np.where(first, 0, 1)
    edge_cells[inv_sorted, slot] = cell_of[order]
    forward[inv_sorted, slot] = flat[order, 0] < flat[order, 1]
    interior = edge_cells[:, 1] >= 0
    if np.any(interior & (forward[:, 0] == forward[:, 1])):
        e = int(np.flatnonzero(interior & (forward[:, 0] == forward[:, 1]))[0])
        raise NonConforming(f"cells {tuple(edge_cells[e])} overlap across edge {tuple(edges[e])}")

    d = V[edges[:, 1]] - V[edges[:, 0]]
    lengths = np.hypot(d[:, 0], d[:, 1])
    # normal to the right of a->b when the cell traverses a->b (CCW cell)
    nr = np.stack([d[:, 1], -d[:, 0]], axis=1) / lengths[:, None]
    normals = np.zeros((E, 2, 2))
    for s in range(2):
        has = edge_cells[:, s] >= 0
        sign = np.where(forward[:, s], 1.0, -1.0)
        normals[has, s] = sign[has, None] * nr[has]

    cell_edges = inverse.reshape(-1, 3)

    bnd = np.flatnonzero(~interior)
    _check_hanging(V, edges[bnd])
    loops = _boundary_loops(edges, edge_cells, forward, bnd)

    for a in (V, T, edges, edge_cells, normals, lengths, cell_edges):
        a.setflags(write=False)
    return Mesh(V, T, edges, edge_cells, normals, lengths, cell_edges, loops)


def _check_hanging(V, bedges, chunk=256):
    a = V[bedges[:, 0]]
    b = V[bedges[:, 1]]
    d = b - a
    L2 = np.einsum("kd,kd->k", d, d)
    for start in range(0, len(bedges), chunk):
        sl = slice(start, start + chunk)
        rel = V[None, :, :] - a[sl, None, :]
        s = np.einsum("kvd,kd->kv", rel, d[sl]) / L2[sl, None]
        off = np.abs(cross2(d[sl, None, :], rel)) / np.sqrt(L2[sl, None])
        hit = (s > 1e-12) & (s < 1 - 1e-12) & (off <= 1e-12 * np.sqrt(L2[sl, None]))
        if hit.any():
            k, v = np.argwhere(hit)[0]
            raise NonConforming(f"vertex {v} hangs on boundary edge {tuple(bedges[start + k])}")


def _boundary_loops(edges, edge_cells, forward, bnd):
    nxt = {}
    for e in bnd:
        a, b = int(edges[e, 0]), int(edges[e, 1])
        if not forward[e, 0]:
            a, b = b, a
        nxt.setdefault(a, []).append(b)
    loops = []
    while nxt:
        start = min(nxt)
        loop = [start]
        cur = start
        while True:
            succ = nxt[cur]
            b = succ.pop(0)
            if not succ:
                del nxt[cur]
            if b == start:
                break
            loop.append(b)
            cur = b
            if cur not in nxt:
                raise NonConforming("boundary edges do not form closed loops")
        loops.append(tuple(loop))
    return tuple(loops)


# ---------------------------------------------------------------------------
# shape regularity


def element_regularity(cell):
    """Inradius, circumradius, their ratio and the minimum angle.

    Parameters
    ----------
    cell : array_like, shape (3, 2)
        Triangle vertex coordinates.

    Returns
    -------
    r, R, ratio, min_angle : float
    """
    P = np.asarray(cell, dtype=float)
    a = np.linalg.norm(P[1] - P[2])
    b = np.linalg.norm(P[2] - P[0])
    c = np.linalg.norm(P[0] - P[1])
    area = 0.5 * abs(cross2(P[1] - P[0], P[2] - P[0]))
    if area <= 1e-14 * max(a, b, c) ** 2:
        raise DegenerateCell("zero-area triangle")
    s = 0.5 * (a + b + c)
    r = area / s
    R = a * b * c / (4.0 * area)
    return r, R, R / r, float(_min_angle(a, b, c))


def _min_angle(a, b, c):
    # smallest angle is opposite the shortest side
    sides = np.sort(np.stack(np.broadcast_arrays(a, b, c)), axis=0)
    s, m, l = sides
    cosang = (m * m + l * l - s * s) / (2.0 * m * l)
    return np.arccos(np.clip(cosang, -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class RegularityReport:
    inradius: np.ndarray
    circumradius: np.ndarray
    ratio: np.ndarray
    min_angle: np.ndarray
    K: float
    theta_K: float
    h_min: float
    h_max: float
    quasi_uniformity: float

    def summary(self):
        return {
            "K": self.K,
            "theta_K": self.theta_K,
            "h_min": self.h_min,
            "h_max": self.h_max,
            "quasi_uniformity": self.quasi_uniformity,
            "cells": int(len(self.ratio)),
        }


def mesh_regularity(mesh):
    """Shape-regularity report over every cell of ``mesh``.

    ``h`` is the cell diameter (longest edge).
    """
    L = mesh.edge_lengths[mesh.cell_edges]  # (M, 3)
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    area = mesh.cell_areas
    s = 0.5 * (a + b + c)
    r = area / s
    R = a * b * c / (4.0 * area)
    ratio = R / r
    ang = _min_angle(a, b, c)
    h = L.max(axis=1)
    return RegularityReport(
        inradius=r,
        circumradius=R,
        ratio=ratio,
        min_angle=ang,
        K=float(ratio.max()),
        theta_K=float(ang.min()),
        h_min=float(h.min()),
        h_max=float(h.max()),
        quasi_uniformity=float(h.max() / h.min()),
    )


# ---------------------------------------------------------------------------
# Triangle .node / .ele files


def _base(path):
    path = os.fspath(path)
    for ext in (".node", ".ele"):
        if path.endswith(ext):
            return path[: -len(ext)]
    return path


def _data_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield lineno, text.split()


def _read_node(path):
    lines = _data_lines(path)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise ParseError("empty file", path) from None
    try:
        count, dim, nattr, nmark = (int(x) for x in head[:4])
    except ValueError:
        raise ParseError("bad .node header", path, lineno) from None
    if dim != 2:
        raise ParseError(f"dimension {dim} not supported", path, lineno)
    ids = np.empty(count, dtype=np.int64)
    xy = np.empty((count, 2))
    k = 0
    for lineno, tok in lines:
        if k >= count:
            raise ParseError("more node rows than declared", path, lineno)
        if len(tok) < 3 + nattr + nmark:
            raise ParseError("short node row", path, lineno)
        try:
            ids[k] = int(tok[0])
            xy[k] = float(tok[1]), float(tok[2])
        except ValueError:
            raise ParseError("non-numeric node row", path, lineno) from None
        k += 1
    if k != count:
        raise ParseError(f"expected {count} nodes, found {k}", path)
    return ids, xy


def _read_ele(path):
    lines = _data_lines(path)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise ParseError("empty file", path) from None
    try:
        count, per, nattr = (int(x) for x in head[:3])
    except ValueError:
        raise ParseError("bad .ele header", path, lineno) from None
    if per != 3:
        raise ParseError(f"{per} nodes per cell not supported", path, lineno)
    tri = np.empty((count, 3), dtype=np.int64)
    rows = np.empty(count, dtype=np.int64)
    k = 0
    for lineno, tok in lines:
        if k >= count:
            raise ParseError("more element rows than declared", path, lineno)
        if len(tok) < 4 + nattr:
            raise ParseError("short element row", path, lineno)
        try:
            tri[k] = [int(t) for t in tok[1:4]]
        except ValueError:
            raise ParseError("non-integer element row", path, lineno) from None
        rows[k] = lineno
        k += 1
    if k != count:
        raise ParseError(f"expected {count} elements, found {k}", path)
    return tri, rows


def load_mesh(path):
    """Read a Triangle ``.node``/``.ele`` pair.

    ``path`` is the common base name (an extension is stripped). Node
    numbering may start at 0 or 1; the first node index decides.
    """
    base = _base(path)
    node_path, ele_path = base + ".node", base + ".ele"
    ids, xy = _read_node(node_path)
    tri, rows = _read_ele(ele_path)
    offset = int(ids[0]) if len(ids) else 0
    if offset not in (0, 1):
        raise ParseError("node numbering must start at 0 or 1", node_path)
    if not np.array_equal(ids, np.arange(offset, offset + len(ids))):
        raise ParseError("node indices are not consecutive", node_path)
    tri = tri - offset
    bad = np.flatnonzero((tri < 0).any(axis=1) | (tri >= len(xy)).any(axis=1))
    if len(bad):
        raise ParseError("element references a nonexistent node", ele_path, int(rows[bad[0]]))
    return build_mesh(xy, tri)


def save_mesh(mesh, path):
    """Write ``mesh`` as a 0-based Triangle file pair; returns the base path."""
    base = _base(path)
    with open(base + ".node", "w") as fh:
        fh.write(f"{mesh.n_vertices} 2 0 0\n")
        for i, (x, y) in enumerate(mesh.vertices):
            fh.write(f"{i} {float(x)!r} {float(y)!r}\n")
    with open(base + ".ele", "w") as fh:
        fh.write(f"{mesh.n_cells} 3 0\n")
        for i, (a, b, c) in enumerate(mesh.cells):
            fh.write(f"{i} {int(a)} {int(b)} {int(c)}\n")
    return base
