"""Fully discontinuous P1/P2 Lagrange functions on a mesh.

Coefficients are nodal values, cell by cell: the three vertices in the
cell's counterclockwise order, then (degree 2) the midpoints of the local
edges ``v0v1``, ``v1v2``, ``v2v0``. Nothing ties the values of two cells
together, so traces on a shared edge differ in general.

Edge traces are parameterised by arclength ``t`` in ``[0, |e|]`` measured
from ``mesh.edges[e, 0]`` (the lower vertex index) towards ``edges[e, 1]``.
"""

import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import BoundaryEdgeHasNoJump, PointOutsideCell

BARY_TOL = 1e-12

_NODES = {
    1: np.eye(3),
    2: np.array(
        [
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
            [0.5, 0.5, 0],
            [0, 0.5, 0.5],
            [0.5, 0, 0.5],
        ]
    ),
}
_PAIRS = ((0, 1), (1, 2), (2, 0))


def n_local(degree):
    if degree not in _NODES:
        raise ValueError("degree must be 1 or 2")
    return len(_NODES[degree])


def reference_nodes(degree):
    """Barycentric coordinates of the Lagrange nodes, ``(nloc, 3)``."""
    n_local(degree)
    return _NODES[degree].copy()


def basis(degree, lam):
    """Lagrange basis values at barycentric points ``lam`` ``(..., 3)``."""
    lam = np.asarray(lam, dtype=float)
    if degree == 1:
        return lam.copy()
    if degree != 2:
        raise ValueError("degree must be 1 or 2")
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l0 * l1,
            4 * l1 * l2,
            4 * l2 * l0,
        ],
        axis=-1,
    )


def basis_dlam(degree, lam):
    """Derivatives of the basis w.r.t. the barycentrics, ``(..., nloc, 3)``."""
    lam = np.asarray(lam, dtype=float)
    shape = lam.shape[:-1]
    if degree == 1:
        return np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
    if degree != 2:
        raise ValueError("degree must be 1 or 2")
    out = np.zeros(shape + (6, 3))
    for i in range(3):
        out[..., i, i] = 4 * lam[..., i] - 1
    for k, (i, j) in enumerate(_PAIRS):
        out[..., 3 + k, i] = 4 * lam[..., j]
        out[..., 3 + k, j] = 4 * lam[..., i]
    return out


def node_coordinates(mesh, degree):
    """Physical Lagrange nodes, ``(M, nloc, 2)``."""
    return np.einsum("nk,mkd->mnd", reference_nodes(degree), mesh.cell_coords)


def barycentric(mesh, cells, points):
    """Barycentric coordinates of ``points[i]`` in ``cells[i]``."""
    cells = np.asarray(cells)
    pts = np.asarray(points, dtype=float)
    Ji = mesh.cell_jacobian_inverse[cells]
    rel = pts - mesh.cell_coords[cells, 0]
    xi = np.einsum("...ij,...j->...i", Ji, rel)
    return np.concatenate([1.0 - xi.sum(axis=-1, keepdims=True), xi], axis=-1)


@dataclass(frozen=True, eq=False)
class DGFunction:
    mesh: object
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        nloc = n_local(self.degree)
        c = np.array(self.coeffs, dtype=float)
        if c.size != self.mesh.n_cells * nloc:
            raise ValueError(
                f"expected {self.mesh.n_cells * nloc} coefficients, got {c.size}"
            )
        c = c.reshape(self.mesh.n_cells, nloc)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_dofs(self):
        return self.coeffs.size

    def vector(self):
        """Flat coefficient vector (cell-major) as used by the assembled matrices."""
        return self.coeffs.ravel().copy()

    def __add__(self, other):
        return DGFunction(self.mesh, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return DGFunction(self.mesh, self.degree, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return DGFunction(self.mesh, self.degree, self.coeffs * float(s))

    __rmul__ = __mul__

    # vectorised kernels -------------------------------------------------

    def values_at(self, lam):
        """Values on every cell at the shared barycentric points, ``(M, nq)``."""
        return self.coeffs @ basis(self.degree, lam).T

    def gradients_at(self, lam):
        """Broken gradients on every cell at shared barycentric points, ``(M, nq, 2)``."""
        dphi = basis_dlam(self.degree, lam)  # (nq, nloc, 3)
        dl = np.einsum("qnk,mkd->mqnd", dphi, self.mesh.lambda_gradients)
        return np.einsum("mn,mqnd->mqd", self.coeffs, dl)

    def cell_values(self, cells, lam):
        """Values of the cell polynomials ``cells[i]`` at ``lam[i, ...]``."""
        phi = basis(self.degree, lam)
        return np.einsum("...n,...n->...", self.coeffs[np.asarray(cells)], phi)

    def eval_points(self, cells, points, grad=False):
        """Values (and optionally gradients) of ``cells[i]``'s polynomial at ``points[i]``."""
        cells = np.asarray(cells)
        lam = barycentric(self.mesh, cells, points)
        vals = self.cell_values(cells, lam)
        if not grad:
            return vals
        dphi = basis_dlam(self.degree, lam)
        g = np.einsum(
            "pn,pnk,pkd->pd", self.coeffs[cells], dphi, self.mesh.lambda_gradients[cells]
        )
        return vals, g

    def edge_side_values(self, edges, side, t):
        """Trace values on ``edges`` from ``side`` at relative positions ``t``.

        ``t`` in [0, 1] runs from ``edges[e, 0]`` to ``edges[e, 1]``.
        Returns ``(len(edges), len(t))``.
        """
        lam = edge_barycentric(self.mesh, edges, side, t)
        cells = self.mesh.edge_cells[edges, side]
        nt = len(np.atleast_1d(t))
        return self.cell_values(np.repeat(cells[:, None], nt, axis=1), lam)

    def to_json(self):
        return json.dumps(
            {
                "mesh_hash": self.mesh.hash(),
                "degree": self.degree,
                "coeffs": self.coeffs.ravel().tolist(),
            }
        )

    @classmethod
    def from_json(cls, mesh, text):
        d = json.loads(text)
        if d["mesh_hash"] != mesh.hash():
            raise ValueError("DG function belongs to a different mesh")
        return cls(mesh, int(d["degree"]), np.asarray(d["coeffs"], dtype=float))


def edge_barycentric(mesh, edges, side, t):
    """Barycentrics ``(ne, nt, 3)`` of edge points in the side cell."""
    edges = np.asarray(edges)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    loc = mesh.edge_local_vertices[edges, side]  # (ne, 2)
    if np.any(loc < 0):
        raise BoundaryEdgeHasNoJump("edge has no cell on that side")
    lam = np.zeros((len(edges), len(t), 3))
    rows = np.arange(len(edges))[:, None]
    cols = np.arange(len(t))[None, :]
    lam[rows, cols, loc[:, :1]] = 1.0 - t[None, :]
    lam[rows, cols, loc[:, 1:]] = t[None, :]
    return lam


# ---------------------------------------------------------------------------
# pointwise API


def eval(u, cell, point):  # noqa: A001 - mirrors the mathematical operation
    """Value of the polynomial of ``cell`` at ``point`` (inside the closed cell)."""
    lam = barycentric(u.mesh, np.array([cell]), np.atleast_2d(np.asarray(point, dtype=float)))[0]
    if lam.min() < -BARY_TOL:
        raise PointOutsideCell(f"point {tuple(point)} is outside cell {cell}")
    return float(u.cell_values(cell, lam))


def broken_gradient(u, cell):
    """Gradient of the cell polynomial as a callable ``points -> (n, 2)``."""
    dl = u.mesh.lambda_gradients[cell]  # (3, 2)
    c = u.coeffs[cell]

    def grad(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lam = barycentric(u.mesh, np.full(len(pts), cell), pts)
        dphi = basis_dlam(u.degree, lam)  # (n, nloc, 3)
        return np.einsum("n,pnk,kd->pd", c, dphi, dl)

    return grad


@dataclass(frozen=True)
class EdgeSideTrace:
    edge: int
    side: int
    poly: Polynomial

    def __call__(self, t):
        return self.poly(t)


def edge_trace(u, edge, side):
    """One-sided trace of ``u`` on ``edge`` as a polynomial in arclength."""
    L = float(u.mesh.edge_lengths[edge])
    if u.mesh.edge_cells[edge, side] < 0:
        raise BoundaryEdgeHasNoJump(f"edge {edge} has no side {side}")
    s = np.linspace(0.0, 1.0, u.degree + 1)
    vals = u.edge_side_values(np.array([edge]), side, s)[0]
    p = Polynomial.fit(s * L, vals, u.degree, domain=[0, L], window=[0, L])
    return EdgeSideTrace(int(edge), int(side), p.convert())


def _check_interior(mesh, edge):
    if mesh.edge_cells[edge, 1] < 0:
        raise BoundaryEdgeHasNoJump(f"edge {edge} is a boundary edge")


def edge_jump(u, edge):
    """``trace(side 0) - trace(side 1)``; side 0 is the lower cell index."""
    _check_interior(u.mesh, edge)
    return edge_trace(u, edge, 0).poly - edge_trace(u, edge, 1).poly


def edge_average(u, edge):
    _check_interior(u.mesh, edge)
    return 0.5 * (edge_trace(u, edge, 0).poly + edge_trace(u, edge, 1).poly)


# ---------------------------------------------------------------------------
# construction


def interpolate(mesh, degree, f):
    """Nodal interpolant of ``f``; ``f`` maps ``(n, 2)`` points to ``(n,)``."""
    X = node_coordinates(mesh, degree)
    vals = np.asarray(f(X.reshape(-1, 2)), dtype=float)
    return DGFunction(mesh, degree, vals.reshape(X.shape[:2]))


def constant_dg(mesh, c, degree=1):
    return DGFunction(mesh, degree, np.full((mesh.n_cells, n_local(degree)), float(c)))


def random_dg(mesh, degree, seed=0):
    """Nodal values i.i.d. uniform on [-1, 1] from ``numpy.random.default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    return DGFunction(mesh, degree, rng.uniform(-1.0, 1.0, (mesh.n_cells, n_local(degree))))


# ---------------------------------------------------------------------------
# point location

OUTSIDE = -1


class CellGrid:
    """Uniform bucket grid over cell bounding boxes."""

    def __init__(self, mesh, per_cell=2.0):
        self.mesh = mesh
        c = mesh.cell_coords
        lo, hi = c.min(axis=1), c.max(axis=1)
        self.lo = lo.min(axis=0)
        span = np.maximum(hi.max(axis=0) - self.lo, 1e-300)
        nb = max(1, int(np.sqrt(mesh.n_cells / per_cell)))
        self.shape = np.array([nb, nb])
        self.size = span / nb
        i0 = self._index(lo)
        i1 = self._index(hi)
        buckets = {}
        for k in range(mesh.n_cells):
            for i in range(i0[k, 0], i1[k, 0] + 1):
                for j in range(i0[k, 1], i1[k, 1] + 1):
                    buckets.setdefault((i, j), []).append(k)
        self.buckets = {key: np.array(v, dtype=np.int64) for key, v in buckets.items()}
        self._empty = np.empty(0, dtype=np.int64)

    def _index(self, pts):
        idx = np.floor((np.asarray(pts) - self.lo) / self.size).astype(np.int64)
        return np.clip(idx, 0, self.shape - 1)

    def candidates_box(self, lo, hi):
        i0 = self._index(lo)
        i1 = self._index(hi)
        found = [
            self.buckets[(i, j)]
            for i in range(i0[0], i1[0] + 1)
            for j in range(i0[1], i1[1] + 1)
            if (i, j) in self.buckets
        ]
        if not found:
            return self._empty
        return np.unique(np.concatenate(found))

    def locate_many(self, points, tol=BARY_TOL):
        """Lowest-index containing cell per point, ``OUTSIDE`` when none."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), OUTSIDE, dtype=np.int64)
        lo = self.lo
        hi = lo + self.size * self.shape
        inside_box = np.all((pts >= lo - 1e-12 * self.size) & (pts <= hi + 1e-12 * self.size), axis=1)
        idx = self._index(pts)
        keys = idx[:, 0] * self.shape[1] + idx[:, 1]
        for key in np.unique(keys[inside_box]):
            sel = np.flatnonzero(inside_box & (keys == key))
            i, j = divmod(int(key), int(self.shape[1]))
            cand = self.buckets.get((i, j))
            if cand is None:
                continue
            lam = barycentric(
                self.mesh,
                np.broadcast_to(cand[None, :], (len(sel), len(cand))),
                pts[sel][:, None, :],
            )
            ok = lam.min(axis=2) >= -tol
            first = np.where(ok.any(axis=1), np.argmax(ok, axis=1), -1)
            # candidate arrays are sorted, so the first hit is the lowest index
            hit = first >= 0
            out[sel[hit]] = cand[first[hit]]
        return out


class Locator:
    """Walking point locator with a per-instance last-hit cache."""

    def __init__(self, mesh, tol=BARY_TOL):
        self.mesh = mesh
        self.tol = tol
        self.last = 0
        self._grid = None

    @property
    def grid(self):
        if self._grid is None:
            self._grid = CellGrid(self.mesh)
        return self._grid

    def _walk(self, p):
        mesh = self.mesh
        cell = self.last
        for _ in range(mesh.n_cells + 1):
            lam = barycentric(mesh, np.array([cell]), p[None, :])[0]
            k = int(np.argmin(lam))
            if lam[k] >= -self.tol:
                return cell
            nb = mesh.cell_neighbors[cell, k]
            if nb < 0:
                return None
            cell = int(nb)
        return None

    def _lowest(self, cell, p):
        mesh = self.mesh
        cand = sorted({c for v in mesh.cells[cell] for c in mesh.vertex_cells[v]})
        cand = np.array(cand)
        lam = barycentric(mesh, cand, np.broadcast_to(p, (len(cand), 2)))
        ok = cand[lam.min(axis=1) >= -self.tol]
        return int(ok.min())

    def __call__(self, point):
        p = np.asarray(point, dtype=float).reshape(2)
        cell = self._walk(p)
        if cell is None:
            cell = int(self.grid.locate_many(p[None, :], self.tol)[0])
            if cell == OUTSIDE:
                return OUTSIDE
        cell = self._lowest(cell, p)
        self.last = cell
        return cell


def locate(mesh, point, locator=None):
    """Index of a closed cell containing ``point`` (lowest on ties), else ``OUTSIDE``."""
    if locator is None:
        locator = Locator(mesh)
    return locator(point)


def eval_extended(u, point, locator=None):
    """Zero extension of ``u`` to the whole plane."""
    cell = locate(u.mesh, point, locator)
    if cell == OUTSIDE:
        return 0.0
    lam = barycentric(u.mesh, np.array([cell]), np.atleast_2d(np.asarray(point, dtype=float)))[0]
    return float(u.cell_values(cell, lam))


def eval_extended_many(u, points, grid=None):
    """Vectorised :func:`eval_extended` through a :class:`CellGrid`."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    grid = grid or CellGrid(u.mesh)
    cells = grid.locate_many(pts)
    out = np.zeros(len(pts))
    hit = cells >= 0
    if hit.any():
        lam = barycentric(u.mesh, cells[hit], pts[hit])
        out[hit] = u.cell_values(cells[hit], lam)
    return out
