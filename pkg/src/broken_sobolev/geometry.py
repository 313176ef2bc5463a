"""Small planar geometry kernel: polygons, clipping, predicates.

Everything works on float arrays of shape ``(k, 2)``. Polygons are
counterclockwise unless stated otherwise.
"""

import numpy as np


def cross2(a, b):
    """z-component of the cross product of stacked 2-vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def orient(a, b, c):
    """Twice the signed area of ``(a, b, c)``; positive when counterclockwise."""
    return cross2(np.asarray(b) - a, np.asarray(c) - a)


def polygon_area(poly):
    """Signed shoelace area."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def rot90(v):
    """Rotate stacked vectors by +90 degrees."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def clip_halfplane(poly, point, normal, offset=0.0):
    """Keep the part of ``poly`` where ``(x - point) . normal >= offset``."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return poly
    d = (poly - point) @ normal - offset
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        pi, pj, di, dj = poly[i], poly[j], d[i], d[j]
        if di >= 0.0:
            out.append(pi)
        if (di >= 0.0) != (dj >= 0.0):
            s = di / (di - dj)
            out.append(pi + s * (pj - pi))
    if len(out) < 3:
        return np.empty((0, 2))
    return np.array(out)


def clip_convex(subject, clipper):
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW ``clipper``.

    ``subject`` may be any simple polygon, but the result is only
    guaranteed correct when it is convex as well (all uses here clip
    triangles against convex pieces).
    """
    out = np.asarray(subject, dtype=float)
    c = np.asarray(clipper, dtype=float)
    for i in range(len(c)):
        a = c[i]
        b = c[(i + 1) % len(c)]
        out = clip_halfplane(out, a, rot90(b - a))
        if len(out) == 0:
            break
    return out


def ensure_ccw(poly):
    poly = np.asarray(poly, dtype=float)
    if polygon_area(poly) < 0:
        return poly[::-1].copy()
    return poly


def bbox(poly):
    p = np.asarray(poly)
    return p.min(axis=0), p.max(axis=0)


def points_in_polygon(points, poly):
    """Crossing-number point-in-polygon test, vectorised over points.

    Points exactly on the boundary may land on either side; callers
    that care use explicit tolerances.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(poly, dtype=float)
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    xa, ya = poly[:, 0][None, :], poly[:, 1][None, :]
    q = np.roll(poly, -1, axis=0)
    xb, yb = q[:, 0][None, :], q[:, 1][None, :]
    cond = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = xa + (y - ya) * (xb - xa) / (yb - ya)
    hits = cond & (x < xint)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def distance_to_segments(points, a, b):
    """Distance from each point to the nearest of the segments ``a[k]b[k]``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    L2 = np.einsum("kd,kd->k", d, d)
    rel = pts[:, None, :] - a[None, :, :]
    s = np.clip(np.einsum("pkd,kd->pk", rel, d) / L2[None, :], 0.0, 1.0)
    proj = a[None] + s[..., None] * d[None]
    dist = np.linalg.norm(pts[:, None, :] - proj, axis=2)
    return dist.min(axis=1)


def segment_convex_interval(p, q, clipper):
    """Parameter interval ``[s0, s1]`` of ``p + s (q - p)`` inside ``clipper``.

    Cyrus-Beck clipping against a convex CCW polygon. Returns ``None`` if
    the segment misses the polygon or only touches it.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(q, dtype=float) - p
    s0, s1 = 0.0, 1.0
    c = np.asarray(clipper, dtype=float)
    for i in range(len(c)):
        a = c[i]
        n = rot90(c[(i + 1) % len(c)] - a)  # inward
        num = float((p - a) @ n)
        den = float(d @ n)
        if den == 0.0:
            if num < 0.0:
                return None
            continue
        s = -num / den
        if den > 0:
            s0 = max(s0, s)
        else:
            s1 = min(s1, s)
        if s0 >= s1:
            return None
    return s0, s1


def is_convex_polygon(poly, tol=1e-14):
    poly = ensure_ccw(poly)
    n = len(poly)
    for i in range(n):
        if orient(poly[i - 1], poly[i], poly[(i + 1) % n]) < -tol:
            return False
    return True


def interior_angles(poly):
    """Interior angle at each vertex of a CCW polygon, in (0, 2 pi)."""
    poly = np.asarray(poly, dtype=float)
    prev = np.roll(poly, 1, axis=0)
    nxt = np.roll(poly, -1, axis=0)
    u = prev - poly
    v = nxt - poly
    ang = np.arctan2(cross2(v, u), np.einsum("kd,kd->k", u, v))
    return np.mod(ang, 2 * np.pi)


def drop_collinear(poly, tol=1e-12):
    """Remove vertices whose interior angle is pi (within ``tol``)."""
    poly = np.asarray(poly, dtype=float)
    while len(poly) > 3:
        ang = interior_angles(poly)
        flat = np.flatnonzero(np.abs(ang - np.pi) < tol)
        if len(flat) == 0:
            break
        poly = np.delete(poly, flat[0], axis=0)
    return poly


def ear_clip(poly):
    """Triangulate a simple CCW polygon; returns ``(m, 3, 2)``."""
    pts = [np.asarray(p, dtype=float) for p in ensure_ccw(poly)]
    idx = list(range(len(pts)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(pts) ** 2:
            raise ValueError("ear clipping failed; polygon not simple?")
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if orient(a, b, c) <= 0:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = pts[j]
                if (orient(a, b, p) >= 0 and orient(b, c, p) >= 0
                        and orient(c, a, p) >= 0):
                    inside = True
                    break
            if inside:
                continue
            tris.append((a, b, c))
            del idx[k]
            break
    tris.append(tuple(pts[i] for i in idx))
    return np.array(tris)


def line_intersection(p1, d1, p2, d2):
    """Intersection of the lines ``p1 + s d1`` and ``p2 + t d2``."""
    den = cross2(d1, d2)
    if abs(den) < 1e-300:
        raise ValueError("parallel lines")
    s = cross2(np.asarray(p2) - p1, d2) / den
    return np.asarray(p1) + s * np.asarray(d1)


def polygon_inradius(poly, tol=1e-10):
    """Radius of the largest disk inside a simple polygon.

    Coarse-to-fine grid search for the point of maximal boundary
    distance (the pole of inaccessibility).
    """
    poly = ensure_ccw(poly)
    a = poly
    b = np.roll(poly, -1, axis=0)
    lo, hi = bbox(poly)
    best_r, best_c = -1.0, None
    center, half = (lo + hi) / 2, (hi - lo) / 2
    for _ in range(200):
        g = np.linspace(-1, 1, 21)
        X, Y = np.meshgrid(center[0] + g * half[0], center[1] + g * half[1])
        cand = np.column_stack([X.ravel(), Y.ravel()])
        inside = points_in_polygon(cand, poly)
        if not inside.any():
            break
        cand = cand[inside]
        dist = distance_to_segments(cand, a, b)
        k = int(np.argmax(dist))
        if dist[k] > best_r:
            best_r, best_c = float(dist[k]), cand[k]
        center = best_c
        half = half / 4
        if half.max() < tol:
            break
    return best_r, best_c
