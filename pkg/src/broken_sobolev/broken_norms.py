"""Broken norms, seminorms and integral identities by direct quadrature.

Everything here evaluates the DG function at quadrature points rather
than going through assembled matrices, so it doubles as an independent
check of :mod:`broken_sobolev.constants_lab`.

The broken norm is

    ||u||^2 = int u^2 + sum_cells int |grad u|^2 + sum_interior_edges |e|^-1 int_e [u]^2,

with the boundary term ``sum_boundary_edges int_e u^2`` kept separately.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyRegion
from .quadrature import edge_rule, subdivided_triangle_rule, triangle_rule, triangles_rule

POLY_DEGREE = 4
SMOOTH_DEGREE = 10
SMOOTH_EDGE_POINTS = 10


@dataclass(frozen=True)
class NormBreakdown:
    l2_sq: float
    broken_h1_sq: float
    jump_sq: float
    boundary_l2_sq: float

    @property
    def h1h_norm_sq(self):
        return self.l2_sq + self.broken_h1_sq + self.jump_sq

    @property
    def h1h_norm(self):
        return float(np.sqrt(self.h1h_norm_sq))

    def to_dict(self):
        return {**asdict(self), "h1h_norm": self.h1h_norm}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_row(self):
        d = self.to_dict()
        return ",".join(repr(d[k]) for k in ("l2_sq", "broken_h1_sq", "jump_sq", "boundary_l2_sq", "h1h_norm"))


def cell_integrals(u):
    """Per-cell ``int u^2`` and ``int |grad u|^2``."""
    lam, w = triangle_rule(POLY_DEGREE)
    area = u.mesh.cell_areas
    v = u.values_at(lam)
    g = u.gradients_at(lam)
    l2 = area * (v**2 @ w)
    h1 = area * (np.einsum("mqd,mqd->mq", g, g) @ w)
    return l2, h1


def edge_jump_integrals(u, edges=None):
    """``int_e [u]^2`` for interior edges (no length weight)."""
    mesh = u.mesh
    edges = mesh.interior_edges if edges is None else np.asarray(edges)
    t, w = edge_rule(3)
    j = u.edge_side_values(edges, 0, t) - u.edge_side_values(edges, 1, t)
    return mesh.edge_lengths[edges] * (j**2 @ w)


def edge_l2_integrals(u, edges):
    """``int_e u^2`` from the single side of each boundary edge."""
    edges = np.asarray(edges)
    t, w = edge_rule(3)
    v = u.edge_side_values(edges, 0, t)
    return u.mesh.edge_lengths[edges] * (v**2 @ w)


def norm_breakdown(u, jump_exponent=-1.0):
    """All terms of the broken norm of ``u``.

    ``jump_exponent`` sets the jump weight ``|e|**jump_exponent``; only
    the default ``-1`` is the broken norm, other values exist to sabotage
    the estimators in negative controls.
    """
    mesh = u.mesh
    l2, h1 = cell_integrals(u)
    ie = mesh.interior_edges
    jumps = edge_jump_integrals(u, ie) * mesh.edge_lengths[ie] ** jump_exponent
    bnd = edge_l2_integrals(u, mesh.boundary_edges)
    # fixed-order sums keep results bit-reproducible
    return NormBreakdown(
        float(np.sum(l2)), float(np.sum(h1)), float(np.sum(jumps)), float(np.sum(bnd))
    )


# ---------------------------------------------------------------------------
# seminorms

SEMINORM_KINDS = ("f1", "f2", "f3")


@dataclass(frozen=True)
class SeminormSpec:
    """``f1 = ||u||_{L2(G)}``, ``f2 = |int_G u|`` over boundary edges G; ``f3 = |int_w u|`` over cells w."""

    kind: str
    region: tuple

    def __post_init__(self):
        if self.kind not in SEMINORM_KINDS:
            raise ValueError(f"unknown seminorm kind {self.kind!r}")
        object.__setattr__(self, "region", tuple(int(i) for i in self.region))
        if not self.region:
            raise EmptyRegion(f"{self.kind} needs a nonempty region")

    def validate(self, mesh):
        r = np.asarray(self.region)
        if self.kind == "f3":
            if r.min() < 0 or r.max() >= mesh.n_cells:
                raise ValueError("cell index out of range")
            if mesh.cell_areas[r].sum() <= 0:
                raise EmptyRegion("region has zero area")
        else:
            if r.min() < 0 or r.max() >= mesh.n_edges:
                raise ValueError("edge index out of range")
            if np.any(mesh.edge_cells[r, 1] >= 0):
                raise ValueError(f"{self.kind} region must consist of boundary edges")
        return self

    def measure(self, mesh):
        r = np.asarray(self.region)
        return float(mesh.cell_areas[r].sum() if self.kind == "f3" else mesh.edge_lengths[r].sum())

    @classmethod
    def whole_boundary(cls, mesh, kind="f1"):
        return cls(kind, tuple(mesh.boundary_edges))

    @classmethod
    def boundary_where(cls, mesh, kind, predicate):
        """Boundary edges whose midpoints satisfy ``predicate(x, y)``."""
        be = mesh.boundary_edges
        mid = 0.5 * (mesh.vertices[mesh.edges[be, 0]] + mesh.vertices[mesh.edges[be, 1]])
        keep = np.array([bool(predicate(x, y)) for x, y in mid], dtype=bool)
        return cls(kind, tuple(be[keep]))

    @classmethod
    def cells_where(cls, mesh, predicate):
        """Cells whose centroids satisfy ``predicate(x, y)``."""
        cen = mesh.cell_coords.mean(axis=1)
        keep = np.array([bool(predicate(x, y)) for x, y in cen], dtype=bool)
        return cls("f3", tuple(np.flatnonzero(keep)))

    @classmethod
    def whole_domain(cls, mesh):
        return cls("f3", tuple(range(mesh.n_cells)))


_REGIONS = {
    "all-boundary": lambda m, k: SeminormSpec.whole_boundary(m, k),
    "left": lambda m, k: SeminormSpec.boundary_where(m, k, lambda x, y: abs(x - m.vertices[:, 0].min()) < 1e-12),
    "bottom": lambda m, k: SeminormSpec.boundary_where(m, k, lambda x, y: abs(y - m.vertices[:, 1].min()) < 1e-12),
    "all": lambda m, k: SeminormSpec.whole_domain(m),
    "left-half": lambda m, k: SeminormSpec.cells_where(m, lambda x, y: x < m.vertices[:, 0].mean()),
    "empty": lambda m, k: SeminormSpec(k, ()),
}


def parse_seminorm(text, mesh):
    """Build a spec from ``kind:region``, e.g. ``f1:all-boundary``, ``f2:left``, ``f3:all``."""
    try:
        kind, region = text.split(":")
    except ValueError:
        raise ValueError(f"seminorm must look like kind:region, got {text!r}") from None
    if kind not in SEMINORM_KINDS:
        raise ValueError(f"unknown seminorm kind {kind!r}")
    if region not in _REGIONS:
        raise ValueError(f"unknown region {region!r}; choose from {sorted(_REGIONS)}")
    if kind == "f3" and region in ("all-boundary", "left", "bottom"):
        raise ValueError("f3 needs a cell region")
    if kind != "f3" and region in ("all", "left-half"):
        raise ValueError(f"{kind} needs a boundary region")
    return _REGIONS[region](mesh, kind).validate(mesh)


def seminorm(u, spec):
    spec.validate(u.mesh)
    r = np.asarray(spec.region)
    if spec.kind == "f3":
        lam, w = triangle_rule(POLY_DEGREE)
        v = u.values_at(lam)[r]
        return float(abs(np.sum(u.mesh.cell_areas[r] * (v @ w))))
    t, w = edge_rule(3)
    v = u.edge_side_values(r, 0, t)
    L = u.mesh.edge_lengths[r]
    if spec.kind == "f1":
        return float(np.sqrt(np.sum(L * (v**2 @ w))))
    return float(abs(np.sum(L * (v @ w))))


# ---------------------------------------------------------------------------
# integral identities


class Bump:
    """Smooth bump ``exp(1 - 1 / (1 - s))``, ``s = |x - center|^2 / radius^2``, zero for ``s >= 1``."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def _s(self, x):
        rel = np.atleast_2d(x) - self.center
        return rel, np.einsum("kd,kd->k", rel, rel) / self.radius**2

    def __call__(self, x):
        _, s = self._s(x)
        out = np.zeros(len(s))
        m = s < 1
        out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m]))
        return out

    def grad(self, x):
        rel, s = self._s(x)
        out = np.zeros(rel.shape)
        m = s < 1
        val = np.exp(1.0 - 1.0 / (1.0 - s[m]))
        dphi_ds = -val / (1.0 - s[m]) ** 2
        out[m] = (dphi_ds * 2.0 / self.radius**2)[:, None] * rel[m]
        return out


def _smooth_cell_rule(mesh, levels):
    lam, w = subdivided_triangle_rule(SMOOTH_DEGREE, levels)
    pts, wts = triangles_rule(mesh.cell_coords, lam, w)
    cells = np.repeat(np.arange(mesh.n_cells), len(w))
    return cells, pts, wts


def _edge_points(mesh, edges, npoints, levels=0):
    t, w = edge_rule(npoints)
    k = 2**levels
    t = ((np.arange(k)[:, None] + t[None, :]) / k).ravel()
    w = np.tile(w, k) / k
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    return t, w, pts


def _auto_levels(mesh, phi):
    radius = getattr(phi, "radius", None)
    if radius is None:
        return 2
    h = float(mesh.cell_diameters.max())
    return max(0, int(np.ceil(np.log2(16 * h / radius))))


def ibp_residual(u, phi, grad_phi=None, component=0, levels=None):
    """Residual of the broken integration-by-parts identity.

    ``int u d_k phi + sum_cells int d_k u phi - sum_interior_edges int_e [u]_{n_k} phi``
    with ``[u]_{n_k} = u_0 n_{0,k} + u_1 n_{1,k}``, for ``phi`` vanishing on
    the boundary. Cells use a degree-10 rule on ``4**levels`` subtriangles,
    edges a 10-point Gauss rule on ``2**levels`` pieces. By default
    ``levels`` resolves ``phi.radius`` (when present) with about 16
    subcells across.
    """
    mesh = u.mesh
    if levels is None:
        levels = _auto_levels(mesh, phi)
    grad_phi = grad_phi or phi.grad
    cells, pts, wts = _smooth_cell_rule(mesh, levels)
    vals, g = u.eval_points(cells, pts, grad=True)
    vol = np.sum(wts * (vals * grad_phi(pts)[:, component] + g[:, component] * phi(pts)))
    ie = mesh.interior_edges
    t, w, ep = _edge_points(mesh, ie, SMOOTH_EDGE_POINTS, levels)
    jump = u.edge_side_values(ie, 0, t) - u.edge_side_values(ie, 1, t)
    n0 = mesh.edge_normals[ie, 0, component]
    ph = phi(ep.reshape(-1, 2)).reshape(ep.shape[:2])
    edge = np.sum(mesh.edge_lengths[ie] * n0 * ((jump * ph) @ w))
    return float(abs(vol - edge))


def _patch_candidates(mesh, patch):
    out = np.asarray(patch.outline)
    lo, hi = out.min(axis=0), out.max(axis=0)
    c = mesh.cell_coords
    return np.flatnonzero(np.all((c.max(axis=1) >= lo) & (c.min(axis=1) <= hi), axis=1))


def _edge_field_term(u, fld, edges, sides):
    """``sum_e int_e (sum_s sign_s u_s^2) phi . n_0`` with ``phi`` resolved per patch piece."""
    mesh = u.mesh
    t0, w0 = edge_rule(SMOOTH_EDGE_POINTS)
    total = 0.0
    V = mesh.vertices
    for e in edges:
        a, b = V[mesh.edges[e, 0]], V[mesh.edges[e, 1]]
        n0 = mesh.edge_normals[e, 0]
        L = mesh.edge_lengths[e]
        for k, p in enumerate(fld.patches):
            for s0, s1 in p.segment_pieces(a, b):
                mid = a + 0.5 * (s0 + s1) * (b - a)
                if fld.locate(mid[None, :])[0] != k:
                    continue
                t = s0 + (s1 - s0) * t0
                x = a[None, :] + t[:, None] * (b - a)[None, :]
                sq = np.zeros(len(t))
                for side, sign in sides:
                    sq += sign * u.edge_side_values(np.array([e]), side, t)[0] ** 2
                flux = p.value(x) @ n0
                total += L * (s1 - s0) * np.sum(w0 * sq * flux)
    return total


def trace_identity_residual(u, fld):
    """Residual of the divergence identity for ``u**2 phi`` cell by cell.

    ``int_boundary u^2 phi.n + sum_interior int_e [u^2 phi] - int (2 u grad u . phi + u^2 div phi)``
    where ``[u^2 phi] = (u_0^2 - u_1^2) phi . n_0``. Cells are clipped
    against every patch so each quadrature piece sees one smooth formula.
    """
    mesh = u.mesh
    vol = 0.0
    coords = mesh.cell_coords
    for k, p in enumerate(fld.patches):
        for c in _patch_candidates(mesh, p):
            pts, w = p.cell_rule(coords[c])
            if len(w) == 0:
                continue
            vals, g = u.eval_points(np.full(len(w), c), pts, grad=True)
            phi = p.value(pts)
            vol += np.sum(w * (2 * vals * np.einsum("kd,kd->k", g, phi) + vals**2 * p.div(pts)))
    bnd = _edge_field_term(u, fld, mesh.boundary_edges, ((0, 1.0),))
    inner = _edge_field_term(u, fld, mesh.interior_edges, ((0, 1.0), (1, -1.0)))
    return float(abs(bnd + inner - vol))
