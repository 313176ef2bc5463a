"""Piecewise analytic vector fields with controlled divergence and flux.

Two constructions live here.

*Collar field.* Each boundary segment ``AB`` of a polygon gets a triangle
``OAB`` with apex ``O`` inside the domain, carrying ``(x - O) / H`` where
``H`` is the height of ``O`` over ``AB``. The normal component is 1 on
``AB`` and 0 on both legs, so the field extended by zero has continuous
normal component, divergence ``2 / H`` on the triangle and unit outward
flux through the boundary.

*Strip field.* A layer along the boundary assembled from rectangles
(``(delta - d) n_out``, divergence 1, zero on the inner side), kites at
convex vertices (``(x - P) / 2`` with ``P`` the corner of the inner
offset) and annular sectors at concave vertices
(``(1 - rho**2 / r**2) (x - c) / 2``, divergence 1 away from ``c``,
zero on the arc ``r = rho``). The sector centre ``c`` is pushed outward
along the bisector until the layer is ``alpha * delta`` thick at the
vertex; the arc then meets the inner edges of both neighbouring
rectangles tangentially.

The exact distance strip ``{dist(x, boundary) < delta}`` used to measure
``int u**2`` is independent of the field layer and is handled by
:func:`strip_quadrature`.
"""

import json
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import CollarOverlap, StripTooWide, UnsupportedPolygon
from .geometry import (
    clip_convex,
    clip_halfplane,
    cross2,
    distance_to_segments,
    drop_collinear,
    ear_clip,
    ensure_ccw,
    interior_angles,
    is_convex_polygon,
    line_intersection,
    points_in_polygon,
    polygon_area,
    polygon_inradius,
    rot90,
    segment_convex_interval,
)
from .quadrature import integrate_polygon_rule, polar_region_rule, triangle_rule, triangles_rule

CELL_DEGREE = 10


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.hypot(v[0], v[1])


def _pt(p):
    return tuple(float(c) for c in p)


def _inside_convex(poly, x, tol):
    q = np.roll(poly, -1, axis=0)
    d = q - poly
    L = np.hypot(d[:, 0], d[:, 1])
    cr = d[None, :, 0] * (x[:, None, 1] - poly[None, :, 1]) - d[None, :, 1] * (
        x[:, None, 0] - poly[None, :, 0]
    )
    return np.all(cr >= -tol * L[None, :], axis=1)


def _sides(poly, n):
    """Sample points and outward normals on every side of a CCW polygon."""
    s = (np.arange(n) + 0.5) / n
    out = []
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        nrm = -rot90(_unit(b - a))
        out.append((a + s[:, None] * (b - a), np.broadcast_to(nrm, (n, 2))))
    return out


class _ConvexPatch:
    """Shared behaviour of patches whose region is a convex polygon."""

    def contains(self, x, tol=1e-12):
        poly = self.region
        scale = float(np.max(np.abs(poly))) + 1.0
        return _inside_convex(poly, np.atleast_2d(x).real, tol * scale)

    def cell_rule(self, tri, degree=CELL_DEGREE):
        return integrate_polygon_rule(clip_convex(tri, self.region), degree)

    def segment_pieces(self, p, q):
        iv = segment_convex_interval(p, q, self.region)
        if iv is None or iv[1] - iv[0] < 1e-13:
            return []
        return [iv]

    def boundary_samples(self, n=100):
        return _sides(self.region, n)

    def corners(self):
        return self.region

    @property
    def outline(self):
        return self.region

    def div(self, x):
        return np.full(len(np.atleast_2d(x)), self.scale * self.target_div)

    def to_dict(self):
        d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}
        d["type"] = type(self).__name__
        return d


@dataclass(frozen=True)
class CollarTriangle(_ConvexPatch):
    """Triangle ``(a, b, apex)`` over boundary segment ``ab`` carrying ``(x - apex) / H``.

    ``center`` shifts the field origin away from the apex and ``scale``
    multiplies the field; both exist for negative controls.
    """

    apex: tuple
    a: tuple
    b: tuple
    scale: float = 1.0
    center: tuple = None

    @cached_property
    def region(self):
        return np.array([self.a, self.b, self.apex], dtype=float)

    @property
    def height(self):
        a, b, o = self.region
        return float(cross2(b - a, o - a) / np.hypot(*(b - a)))

    @property
    def target_div(self):
        return 2.0 / self.height

    def value(self, x):
        o = np.asarray(self.center if self.center is not None else self.apex)
        return self.scale * (np.atleast_2d(x) - o) / self.height

    def sup(self):
        a, b, o = self.region
        return abs(self.scale) * max(np.hypot(*(a - o)), np.hypot(*(b - o))) / self.height


@dataclass(frozen=True)
class StripRectangle(_ConvexPatch):
    """Rectangle of width ``delta`` on boundary piece ``ab``; field ``(delta - d) n_out``."""

    a: tuple
    b: tuple
    delta: float
    scale: float = 1.0

    @cached_property
    def normal_in(self):
        return rot90(_unit(np.subtract(self.b, self.a)))

    @cached_property
    def region(self):
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        n = self.normal_in
        return np.array([a, b, b + self.delta * n, a + self.delta * n])

    target_div = 1.0

    def value(self, x):
        x = np.atleast_2d(x)
        n = self.normal_in
        d = (x[:, 0] - self.a[0]) * n[0] + (x[:, 1] - self.a[1]) * n[1]
        return -self.scale * (self.delta - d)[:, None] * n[None, :]

    def sup(self):
        return abs(self.scale) * self.delta


@dataclass(frozen=True)
class StripWedge(_ConvexPatch):
    """Kite ``(vertex, f_out, p, f_in)`` at a convex corner; field ``(x - p) / 2``."""

    vertex: tuple
    f_out: tuple
    p: tuple
    f_in: tuple
    scale: float = 1.0
    center: tuple = None

    @cached_property
    def region(self):
        return np.array([self.vertex, self.f_out, self.p, self.f_in], dtype=float)

    target_div = 1.0

    def value(self, x):
        o = np.asarray(self.center if self.center is not None else self.p)
        return self.scale * (np.atleast_2d(x) - o) / 2.0

    def sup(self):
        return abs(self.scale) * float(np.max(np.hypot(*(self.region - self.p).T))) / 2.0


@dataclass(frozen=True)
class StripSector:
    """Annular sector at a concave corner.

    Region: the cone at ``center`` from ``d_start`` counterclockwise to
    ``d_end`` (the two inward edge normals), cut at radius ``rho`` and
    intersected with the domain. ``t`` is the distance from ``center``
    to both boundary lines; ``rho = t + delta``.
    """

    center: tuple
    rho: float
    t: float
    d_start: tuple
    d_end: tuple
    vertex: tuple
    scale: float = 1.0

    target_div = 1.0

    @cached_property
    def region(self):
        """Cone triangle enclosing the sector (convex, CCW)."""
        c = np.asarray(self.center, float)
        half = 0.5 * np.arccos(np.clip(np.dot(self.d_start, self.d_end), -1, 1))
        L = 1.01 * self.rho / np.cos(half)
        return np.array([c, c + L * np.asarray(self.d_start), c + L * np.asarray(self.d_end)])

    def arc(self, n):
        a0 = np.arctan2(self.d_start[1], self.d_start[0])
        a1 = np.arctan2(self.d_end[1], self.d_end[0])
        a1 = a0 + np.mod(a1 - a0, 2 * np.pi)
        ang = a0 + (np.arange(n) + 0.5) / n * (a1 - a0)
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
        return np.asarray(self.center) + self.rho * dirs, dirs

    @property
    def outline(self):
        pts, _ = self.arc(64)
        c = np.asarray(self.center)
        ends = c + self.rho * np.array([self.d_start, self.d_end])
        return np.vstack([c, ends[:1], pts, ends[1:]])

    def contains(self, x, tol=1e-12):
        x = np.atleast_2d(x).real
        scale = self.rho + 1.0
        in_cone = _inside_convex(self.region, x, tol * scale)
        r = np.hypot(*(x - self.center).T)
        return in_cone & (r <= self.rho + tol * scale)

    def value(self, x):
        rel = np.atleast_2d(x) - np.asarray(self.center)
        r2 = rel[:, 0] ** 2 + rel[:, 1] ** 2
        return self.scale * ((1.0 - self.rho**2 / r2) / 2.0)[:, None] * rel

    def div(self, x):
        return np.full(len(np.atleast_2d(x)), float(self.scale))

    def sup(self):
        # |phi| = (rho**2 / r - r) / 2 decreases in r; inside the domain r >= t
        return abs(self.scale) * (self.rho**2 / self.t - self.t) / 2.0

    def cell_rule(self, tri, degree=CELL_DEGREE):
        q = clip_convex(tri, self.region)
        return polar_region_rule(q, self.center, 0.0, self.rho, npoints=degree // 2 + 2)

    def segment_pieces(self, p, q):
        iv = segment_convex_interval(p, q, self.region)
        if iv is None:
            return []
        p = np.asarray(p, float)
        d = np.asarray(q, float) - p
        rel = p - self.center
        A, B, C = d @ d, 2 * rel @ d, rel @ rel - self.rho**2
        disc = B * B - 4 * A * C
        if disc <= 0:
            return []
        sq = np.sqrt(disc)
        s0 = max(iv[0], (-B - sq) / (2 * A))
        s1 = min(iv[1], (-B + sq) / (2 * A))
        return [(s0, s1)] if s1 - s0 > 1e-13 else []

    def boundary_samples(self, n=100):
        c = np.asarray(self.center)
        s = (np.arange(n) + 0.5) / n * self.rho
        ds, de = np.asarray(self.d_start), np.asarray(self.d_end)
        pts, dirs = self.arc(n)
        return [
            (c + s[:, None] * ds, np.broadcast_to(-rot90(ds), (n, 2))),
            (c + s[:, None] * de, np.broadcast_to(rot90(de), (n, 2))),
            (pts, dirs),
        ]

    def corners(self):
        c = np.asarray(self.center)
        return np.vstack(
            [
                self.vertex,
                c + self.t * np.asarray(self.d_start),
                c + self.t * np.asarray(self.d_end),
                self.arc(16)[0],
            ]
        )

    def to_dict(self):
        d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}
        d["type"] = type(self).__name__
        return d


PATCH_TYPES = {cls.__name__: cls for cls in (CollarTriangle, StripRectangle, StripWedge, StripSector)}


@dataclass(frozen=True, eq=False)
class PiecewiseField:
    """Vector field given patch by patch and extended by zero."""

    kind: str
    domain: np.ndarray
    patches: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "domain", ensure_ccw(np.asarray(self.domain, dtype=float)))
        object.__setattr__(self, "patches", tuple(self.patches))

    @cached_property
    def scale(self):
        return float(np.max(np.abs(self.domain))) + 1.0

    def in_domain(self, x, tol=1e-12):
        x = np.atleast_2d(x).real
        d = self.domain
        near = distance_to_segments(x, d, np.roll(d, -1, axis=0)) <= tol * self.scale
        return points_in_polygon(x, d) | near

    def locate(self, x, tol=1e-12):
        """Index of the first patch containing each point, ``-1`` in the zero region."""
        x = np.atleast_2d(x)
        out = np.full(len(x), -1, dtype=np.int64)
        inside = self.in_domain(x, tol)
        for k, p in enumerate(self.patches):
            free = (out < 0) & inside
            if not free.any():
                break
            hit = np.zeros(len(x), dtype=bool)
            hit[free] = p.contains(x[free], tol)
            out[hit] = k
        return out

    def value(self, x):
        x = np.atleast_2d(x)
        idx = self.locate(x)
        out = np.zeros(x.shape, dtype=np.result_type(x.dtype, float))
        for k in np.unique(idx[idx >= 0]):
            sel = idx == k
            out[sel] = self.patches[k].value(x[sel])
        return out

    def div(self, x):
        x = np.atleast_2d(x)
        idx = self.locate(x)
        out = np.zeros(len(x))
        for k in np.unique(idx[idx >= 0]):
            sel = idx == k
            out[sel] = self.patches[k].div(x[sel])
        return out

    def sup(self):
        return max((p.sup() for p in self.patches), default=0.0)

    def replace_patch(self, index, **changes):
        """Copy of the field with one patch's parameters changed."""
        patches = list(self.patches)
        patches[index] = replace(patches[index], **changes)
        return PiecewiseField(self.kind, self.domain, patches, dict(self.params))

    def to_json(self):
        return json.dumps(
            {
                "kind": self.kind,
                "domain": self.domain.tolist(),
                "params": self.params,
                "patches": [p.to_dict() for p in self.patches],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        patches = []
        for pd in d["patches"]:
            pd = dict(pd)
            typ = PATCH_TYPES[pd.pop("type")]
            patches.append(
                typ(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in pd.items()})
            )
        return cls(d["kind"], np.array(d["domain"]), patches, d.get("params", {}))


def _clean_polygon(polygon):
    poly = drop_collinear(ensure_ccw(np.asarray(polygon, dtype=float)))
    if len(poly) < 3 or polygon_area(poly) <= 0:
        raise UnsupportedPolygon("polygon must have at least three non-collinear vertices")
    return poly


def _overlap_area(p, q):
    return abs(polygon_area(clip_convex(p, q)))


def _domain_area_in(poly_tris, region):
    return sum(_overlap_area(t, region) for t in poly_tris)


# ---------------------------------------------------------------------------
# collar


def default_apexes(polygon):
    """Edge midpoint moved inward by half the inradius of the polygon."""
    poly = _clean_polygon(polygon)
    r, _ = polygon_inradius(poly)
    q = np.roll(poly, -1, axis=0)
    mids = 0.5 * (poly + q)
    normals = np.array([rot90(_unit(b - a)) for a, b in zip(poly, q)])
    return mids + 0.5 * r * normals


def collar_field(polygon, apexes=None, tol=1e-12):
    """Collar field of a simple polygon.

    Parameters
    ----------
    polygon : array_like, shape (k, 2)
        Domain boundary; orientation is normalised and collinear
        vertices are dropped, so segment ``i`` joins vertices ``i`` and
        ``i + 1`` of the cleaned polygon.
    apexes : array_like, shape (k, 2), optional
        One apex per segment; :func:`default_apexes` otherwise.

    Raises
    ------
    CollarOverlap
        Two triangles overlap (``pair`` names them) or a triangle leaves
        the domain (``pair = (i, None)``).
    """
    poly = _clean_polygon(polygon)
    n = len(poly)
    apexes = default_apexes(poly) if apexes is None else np.asarray(apexes, dtype=float)
    if apexes.shape != (n, 2):
        raise ValueError(f"need {n} apexes, got shape {apexes.shape}")
    patches = [
        CollarTriangle(_pt(o), _pt(poly[i]), _pt(poly[(i + 1) % n])) for i, o in enumerate(apexes)
    ]
    tris = ear_clip(poly)
    scale = polygon_area(poly)
    for i, p in enumerate(patches):
        if p.height <= tol * np.sqrt(scale):
            raise CollarOverlap(f"apex {i} is not on the inner side of its segment", pair=(i, None))
        area = polygon_area(p.region)
        if area - _domain_area_in(tris, p.region) > 1e-10 * scale:
            raise CollarOverlap(f"collar triangle {i} leaves the domain", pair=(i, None))
    for i in range(n):
        for j in range(i + 1, n):
            if _overlap_area(patches[i].region, patches[j].region) > 1e-10 * scale:
                raise CollarOverlap(f"collar triangles {i} and {j} overlap", pair=(i, j))
    return PiecewiseField("collar", poly, patches, {"apexes": apexes.tolist()})


# ---------------------------------------------------------------------------
# boundary strip


@dataclass(frozen=True, eq=False)
class StripDecomposition:
    delta: float
    alpha: float
    rectangles: tuple
    wedges: tuple
    sectors: tuple
    inner_boundary: np.ndarray
    vertices: tuple
    thickness_min: float
    thickness_max: float

    def summary(self):
        return {
            "delta": self.delta,
            "alpha": self.alpha,
            "rectangles": len(self.rectangles),
            "wedges": len(self.wedges),
            "sectors": len(self.sectors),
            "thickness_min": self.thickness_min,
            "thickness_max": self.thickness_max,
            "vertices": list(self.vertices),
        }


def convex_vertex_bound(delta, theta):
    return delta / np.sin(theta / 2)


def concave_vertex_bound(delta, alpha, theta):
    s = np.sin(theta / 2)
    return delta * (1 - alpha * s) / ((1 - alpha) * s)


def _segments_cross(p1, p2, q1, q2):
    d1 = cross2(q2 - q1, p1 - q1)
    d2 = cross2(q2 - q1, p2 - q1)
    d3 = cross2(p2 - p1, q1 - p1)
    d4 = cross2(p2 - p1, q2 - p1)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _check_simple(line, closed=True):
    n = len(line)
    m = n if closed else n - 1
    for i in range(m):
        for j in range(i + 2, m):
            if closed and i == 0 and j == n - 1:
                continue
            if _segments_cross(line[i], line[(i + 1) % n], line[j], line[(j + 1) % n]):
                return False
    return True


def strip_field(polygon, delta, alpha=0.5):
    """Boundary-strip field of width ``delta``.

    Supported: convex polygons and polygons without two adjacent
    concave vertices.

    Returns
    -------
    StripDecomposition, PiecewiseField

    Raises
    ------
    UnsupportedPolygon
        Two concave vertices are adjacent.
    StripTooWide
        Patches do not fit: an edge is shorter than its two corner
        patches, patches overlap, or the inner boundary self-intersects.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    poly = _clean_polygon(polygon)
    n = len(poly)
    theta = interior_angles(poly)
    concave = theta > np.pi
    if np.any(concave & np.roll(concave, -1)):
        raise UnsupportedPolygon("adjacent concave vertices are not supported")
    q = np.roll(poly, -1, axis=0)
    dirs = np.array([_unit(b - a) for a, b in zip(poly, q)])
    n_in = rot90(dirs)

    # corner patches; foot[i] = (foot on incoming edge, foot on outgoing edge)
    wedges, sectors, corner, feet, info = [], [], {}, {}, []
    for i in range(n):
        V = poly[i]
        e_in, e_out = (i - 1) % n, i
        th = float(theta[i])
        if not concave[i]:
            P = line_intersection(V + delta * n_in[e_in], dirs[e_in], V + delta * n_in[e_out], dirs[e_out])
            f_in = P - delta * n_in[e_in]
            f_out = P - delta * n_in[e_out]
            w = StripWedge(_pt(V), _pt(f_out), _pt(P), _pt(f_in))
            wedges.append(w)
            corner[i] = w
            feet[i] = (f_in, f_out)
            bound = convex_vertex_bound(delta, th)
            info.append({"index": i, "angle": th, "kind": "convex", "bound": float(bound)})
        else:
            sh = np.sin(th / 2)
            bis = -_unit(n_in[e_in] + n_in[e_out])
            s = (1 - alpha) * delta / (1 - sh)
            t = s * sh
            c = V + s * bis
            sec = StripSector(
                _pt(c), float(t + delta), float(t), _pt(n_in[e_out]), _pt(n_in[e_in]), _pt(V)
            )
            sectors.append(sec)
            corner[i] = sec
            feet[i] = (c + t * n_in[e_in], c + t * n_in[e_out])
            bound = concave_vertex_bound(delta, alpha, th)
            info.append({"index": i, "angle": th, "kind": "concave", "bound": float(bound)})

    rects = []
    for i in range(n):
        a = feet[i][1]
        b = feet[(i + 1) % n][0]
        if (b - a) @ dirs[i] <= 1e-12 * delta:
            raise StripTooWide(f"edge {i} is too short for a strip of width {delta}")
        rects.append(StripRectangle(_pt(a), _pt(b), float(delta)))

    patches = []
    for i in range(n):
        patches.append(corner[i])
        patches.append(rects[i])

    # inner boundary: corner point or arc, then the inner side of the rectangle
    inner = []
    for i in range(n):
        if concave[i]:
            inner.extend(corner[i].arc(16)[0][::-1])
        else:
            inner.append(np.asarray(corner[i].p))
        r = rects[i].region
        inner.extend([r[3], r[2]])
    inner = np.array(inner)
    _check_strip_fits(poly, patches, inner, delta)

    th_max = max((i["bound"] for i in info if i["kind"] == "convex"), default=delta)
    th_min = alpha * delta if concave.any() else delta
    decomp = StripDecomposition(
        float(delta), float(alpha), tuple(rects), tuple(wedges), tuple(sectors), inner,
        tuple(info), float(th_min), float(max(th_max, delta)),
    )
    fld = PiecewiseField(
        "strip", poly, patches, {"delta": float(delta), "alpha": float(alpha), "vertices": list(info)}
    )
    return decomp, fld


def _check_strip_fits(poly, patches, inner, delta):
    scale = delta * delta
    if not np.all(points_in_polygon(inner, poly)):
        raise StripTooWide("inner strip boundary leaves the domain")
    if not _check_simple(inner):
        raise StripTooWide("inner strip boundary self-intersects")
    outlines = [ensure_ccw(p.outline) for p in patches]
    for i in range(len(patches)):
        for j in range(i + 1, len(patches)):
            if _overlap_area(outlines[i], outlines[j]) > 1e-9 * scale:
                raise StripTooWide(f"strip patches {i} and {j} overlap")


# ---------------------------------------------------------------------------
# validation


def complex_step_div(fn, x, h=1e-30):
    """Divergence of a vector callable by complex-step differentiation."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(len(x))
    for k in range(2):
        xc = x.astype(complex)
        xc[:, k] += 1j * h
        out += fn(xc)[:, k].imag / h
    return out


def _sample_patch(patch, fld, n, rng):
    """Rejection-sample ``n`` points inside ``patch`` and the domain."""
    pts = np.asarray(patch.corners(), float)
    outline = np.asarray(patch.outline, float)
    lo, hi = outline.min(axis=0), outline.max(axis=0)
    got = []
    need = n
    for _ in range(200):
        cand = lo + (hi - lo) * rng.random((4 * need + 16, 2))
        ok = patch.contains(cand, tol=-1e-9) & points_in_polygon(cand, fld.domain)
        got.append(cand[ok])
        need -= int(ok.sum())
        if need <= 0:
            break
    allp = np.concatenate(got)[:n] if got else np.empty((0, 2))
    return allp, pts


def field_validate(fld, n=100, n_div=10000, seed=0):
    """Sampled certificate of the properties the estimates rely on.

    Returns a dict with

    * ``div_error``: max ``|div - target|`` over interior samples, with the
      divergence obtained by complex-step differentiation of the field
      formula (independent of the closed-form divergence);
    * ``normal_jump``: max jump of the normal component over ``n`` points
      per interface segment (patch/patch and patch/zero region);
    * ``inner_boundary_max``: max ``|phi|`` on interfaces with the zero region;
    * ``boundary_flux_error``: max ``|phi . n - 1|`` on the boundary (collar only);
    * ``sup_phi`` (closed form) and ``sup_sampled``;
    * ``vertices``: per-vertex sup against its bound (strip only).
    """
    rng = np.random.default_rng(seed)
    scale = fld.scale
    eps = 1e-7 * scale
    div_err = 0.0
    sampled = [np.zeros((0, 2))]
    per = max(1, int(np.ceil(n_div / max(1, len(fld.patches)))))
    for k, p in enumerate(fld.patches):
        pts, corners = _sample_patch(p, fld, per, rng)
        if len(pts):
            d = complex_step_div(p.value, pts)
            div_err = max(div_err, float(np.max(np.abs(d - p.target_div))))
        sampled.extend([pts, corners[fld.in_domain(corners)]])

    jump = 0.0
    inner_max = 0.0
    n_iface = 0
    for k, p in enumerate(fld.patches):
        for x, nrm in p.boundary_samples(n):
            x = np.asarray(x)
            nrm = np.asarray(nrm)
            strict = points_in_polygon(x, fld.domain) & (
                distance_to_segments(x, fld.domain, np.roll(fld.domain, -1, axis=0)) > 1e3 * eps
            )
            if not strict.any():
                continue
            x, nrm = x[strict], nrm[strict]
            n_iface += len(x)
            other = fld.locate(x + eps * nrm)
            mine = p.value(x)
            theirs = np.zeros_like(mine)
            for j in np.unique(other[other >= 0]):
                sel = other == j
                theirs[sel] = fld.patches[j].value(x[sel])
            jn = np.abs(np.einsum("kd,kd->k", mine - theirs, nrm))
            jump = max(jump, float(jn.max()))
            zero_side = other < 0
            if zero_side.any():
                inner_max = max(inner_max, float(np.max(np.hypot(*mine[zero_side].T))))
            sampled.append(x)

    # boundary flux
    dom = fld.domain
    flux_lo, flux_hi = np.inf, -np.inf
    for x, nrm in _sides(dom, n):
        x = np.asarray(x)
        nrm = np.asarray(nrm)
        idx = fld.locate(x - eps * nrm)
        vals = np.zeros_like(x)
        for j in np.unique(idx[idx >= 0]):
            sel = idx == j
            vals[sel] = fld.patches[j].value(x[sel])
        fl = np.einsum("kd,kd->k", vals, nrm)
        flux_lo, flux_hi = min(flux_lo, fl.min()), max(flux_hi, fl.max())
        sampled.append(x)
    flux_err = None
    if fld.kind == "collar":
        flux_err = float(max(abs(flux_lo - 1), abs(flux_hi - 1)))

    allp = np.concatenate(sampled)
    sup_sampled = float(np.max(np.hypot(*fld.value(allp).T))) if len(allp) else 0.0

    vertices = []
    for v in fld.params.get("vertices", []):
        V = fld.domain[v["index"]]
        local = [
            p.sup()
            for p in fld.patches
            if isinstance(p, (StripWedge, StripSector)) and np.allclose(p.vertex, V)
        ]
        local_sup = max(local, default=0.0)
        vertices.append(
            {**v, "sup": float(local_sup), "ok": bool(local_sup <= v["bound"] * (1 + 1e-12))}
        )

    return {
        "kind": fld.kind,
        "div_error": float(div_err),
        "normal_jump": float(jump),
        "inner_boundary_max": float(inner_max),
        "boundary_flux_error": flux_err,
        "boundary_flux_range": [float(flux_lo), float(flux_hi)],
        "sup_phi": float(fld.sup()),
        "sup_sampled": sup_sampled,
        "patch_sups": [float(p.sup()) for p in fld.patches],
        "interface_samples": int(n_iface),
        "vertices": vertices,
    }


# ---------------------------------------------------------------------------
# exact distance strip


@dataclass(frozen=True, eq=False)
class InnerRegion:
    """``{x in domain : dist(x, boundary) >= delta}`` as signed convex pieces.

    ``pieces`` are convex polygons with disjoint interiors whose union,
    minus the disk sectors in ``sectors`` (centre, radius, enclosing
    convex polygon), is the inner region.
    """

    pieces: tuple
    sectors: tuple


def inner_region(polygon, delta):
    poly = _clean_polygon(polygon)
    n = len(poly)
    q = np.roll(poly, -1, axis=0)
    dirs = np.array([_unit(b - a) for a, b in zip(poly, q)])
    n_in = rot90(dirs)
    if is_convex_polygon(poly):
        inner = poly
        for i in range(n):
            inner = clip_halfplane(inner, poly[i], n_in[i], delta)
            if len(inner) == 0:
                break
        return InnerRegion((inner,) if len(inner) else (), ())
    theta = interior_angles(poly)
    mit = np.array(
        [
            line_intersection(
                poly[i] + delta * n_in[i - 1], dirs[i - 1], poly[i] + delta * n_in[i], dirs[i]
            )
            for i in range(n)
        ]
    )
    m_next = np.roll(mit, -1, axis=0)
    if np.any(np.einsum("kd,kd->k", m_next - mit, dirs) <= 0) or not _check_simple(mit):
        raise StripTooWide(f"inner offset at distance {delta} is degenerate")
    dist = distance_to_segments(mit, poly, q)
    if np.any(dist < delta * (1 - 1e-9)) or not np.all(points_in_polygon(mit, poly)):
        raise StripTooWide(f"inner offset at distance {delta} interacts with distant edges")
    pieces = list(ear_clip(mit))
    sectors = []
    for i in np.flatnonzero(theta > np.pi):
        V = poly[i]
        kite = ensure_ccw(np.array([V, V + delta * n_in[i - 1], mit[i], V + delta * n_in[i]]))
        pieces.append(kite)
        sectors.append((V, float(delta), kite))
    return InnerRegion(tuple(pieces), tuple(sectors))


def strip_quadrature(mesh, delta, degree=4, npoints=8):
    """Quadrature for ``int_{dist(x, boundary) < delta} f`` over mesh cells.

    Each cell contributes its full rule minus the rule of its intersection
    with the inner region ``{dist >= delta}``; concave corners add back
    the disk sectors removed from their kites. Weights may therefore be
    negative. Exact for piecewise polynomials up to ``degree`` on the
    polygonal parts; the circular parts use a tensor polar Gauss rule.

    Returns
    -------
    cells : ndarray of int, points : ndarray (n, 2), weights : ndarray (n,)
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if len(mesh.boundary_polygon) != 1:
        raise UnsupportedPolygon("strip regions need a simply connected domain")
    region = inner_region(mesh.outer_boundary(), delta)
    coords = mesh.cell_coords
    lo, hi = coords.min(axis=1), coords.max(axis=1)
    cells, pts, wts = [], [], []

    def add(c, p, w, sign):
        if len(w):
            cells.append(np.full(len(w), c, dtype=np.int64))
            pts.append(p)
            wts.append(sign * w)

    lam, w = triangle_rule(degree)
    p_all, w_all = triangles_rule(coords, lam, w)
    nq = len(w)
    cells.append(np.repeat(np.arange(mesh.n_cells), nq))
    pts.append(p_all)
    wts.append(w_all)
    for piece in region.pieces:
        plo, phi = piece.min(axis=0), piece.max(axis=0)
        near = np.flatnonzero(np.all((hi >= plo) & (lo <= phi), axis=1))
        for c in near:
            p, ww = integrate_polygon_rule(clip_convex(coords[c], piece), degree)
            add(c, p, ww, -1.0)
    for V, r, kite in region.sectors:
        near = np.flatnonzero(np.all((hi >= V - r) & (lo <= V + r), axis=1))
        for c in near:
            poly = clip_convex(coords[c], kite)
            p, ww = polar_region_rule(poly, V, 0.0, r, npoints)
            add(c, p, ww, 1.0)
    return np.concatenate(cells), np.concatenate(pts), np.concatenate(wts)


def strip_region_integral(u, delta):
    """``int u**2`` over the points of the domain closer than ``delta`` to its boundary."""
    cells, pts, w = strip_quadrature(u.mesh, delta)
    vals = u.eval_points(cells, pts)
    return float(np.sum(w * vals**2))
