"""Quadrature rules on the reference triangle and on edges.

Triangle rules are returned in barycentric form: ``lam`` has shape
``(nq, 3)`` and the weights sum to one, so the integral over a physical
triangle is ``area * sum(w * f(lam @ vertices))``.

Two families are provided:

* the symmetric 6-point Dunavant rule, exact for total degree 4, which is
  all that the P1/P2 integrands (``u**2``, ``|grad u|**2``, ``[u]**2``)
  ever need;
* collapsed (Stroud conical) Gauss-Jacobi x Gauss-Legendre products for
  any other degree, used for non-polynomial integrands.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

# Dunavant degree 4: two orbits of type (a, a, 1 - 2a)
_D4_ORBITS = (
    (0.44594849091596488632, 0.22338158967801146570),
    (0.09157621350977074346, 0.10995174365532186764),
)


def _orbit3(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


@lru_cache(maxsize=None)
def _dunavant4():
    lam, w = [], []
    for a, weight in _D4_ORBITS:
        for p in _orbit3(a):
            lam.append(p)
            w.append(weight)
    return np.array(lam), np.array(w)


@lru_cache(maxsize=None)
def _conical(degree):
    n = degree // 2 + 1
    # x along the collapsed direction carries the (1 - x) Jacobian
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xg, wg = np.polynomial.legendre.leggauss(n)
    s = (xj + 1.0) / 2.0
    t = (xg + 1.0) / 2.0
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(wj, wg)
    xi = S.ravel()
    eta = ((1.0 - S) * T).ravel()
    w = W.ravel()
    w = w / w.sum()
    lam = np.column_stack([1.0 - xi - eta, xi, eta])
    return lam, w


def triangle_rule(degree=4):
    """Return ``(lam, w)`` for a rule exact to total ``degree``.

    Parameters
    ----------
    degree : int
        Required polynomial exactness. Degree 4 (or lower) selects the
        6-point Dunavant rule; anything else the conical product rule.

    Returns
    -------
    lam : ndarray, shape (nq, 3)
        Barycentric coordinates of the nodes.
    w : ndarray, shape (nq,)
        Weights normalised to sum to one.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if degree <= 4:
        lam, w = _dunavant4()
    else:
        lam, w = _conical(int(degree))
    return lam.copy(), w.copy()


@lru_cache(maxsize=None)
def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def edge_rule(npoints=3):
    """Gauss-Legendre nodes ``t`` in [0, 1] and weights summing to one.

    ``npoints`` points integrate polynomials of degree ``2*npoints - 1``
    exactly; the default 3 covers every P2 edge integrand.
    """
    t, w = _gauss01(int(npoints))
    return t.copy(), w.copy()


def integrate_polygon_rule(polygon, degree=4):
    """Quadrature nodes and weights on a convex polygon by fan splitting.

    Parameters
    ----------
    polygon : array_like, shape (k, 2)
        Vertices of a convex polygon (either orientation).

    Returns
    -------
    points : ndarray, shape (n, 2)
    weights : ndarray, shape (n,)
        Absolute weights (they sum to the polygon area).
    """
    poly = np.asarray(polygon, dtype=float)
    lam, w = triangle_rule(degree)
    if len(poly) < 3:
        return np.empty((0, 2)), np.empty(0)
    tris = np.stack(
        [np.repeat(poly[:1], len(poly) - 2, axis=0), poly[1:-1], poly[2:]],
        axis=1,
    )
    return triangles_rule(tris, lam, w)


def triangles_rule(tris, lam, w):
    """Map a barycentric rule onto a stack of triangles ``(m, 3, 2)``."""
    tris = np.asarray(tris, dtype=float)
    if len(tris) == 0:
        return np.empty((0, 2)), np.empty(0)
    d1 = tris[:, 1] - tris[:, 0]
    d2 = tris[:, 2] - tris[:, 0]
    area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    pts = np.einsum("qk,mkd->mqd", lam, tris).reshape(-1, 2)
    wts = (area[:, None] * w[None, :]).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def _subdivided(degree, levels):
    lam, w = triangle_rule(degree)
    tris = np.array([np.eye(3)])
    for _ in range(levels):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        tris = np.concatenate(
            [
                np.stack([a, ab, ca], 1),
                np.stack([ab, b, bc], 1),
                np.stack([ca, bc, c], 1),
                np.stack([ab, bc, ca], 1),
            ]
        )
    pts = np.einsum("qk,mkd->mqd", lam, tris).reshape(-1, 3)
    wts = np.tile(w, len(tris)) / len(tris)
    return pts, wts


def subdivided_triangle_rule(degree, levels=0):
    """``triangle_rule(degree)`` applied on ``4**levels`` congruent subtriangles."""
    lam, w = _subdivided(int(degree), int(levels))
    return lam.copy(), w.copy()


def _ray_interval(center, dirs, poly):
    """``[r0, r1]`` of ``center + r d`` inside the convex CCW ``poly``, per direction."""
    a = poly
    n = np.stack([-(np.roll(poly, -1, 0) - a)[:, 1], (np.roll(poly, -1, 0) - a)[:, 0]], 1)
    num = np.einsum("kd,kd->k", a - center, n)
    den = dirs @ n.T  # (nd, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = num[None, :] / den
    pos = den > 1e-300
    neg = den < -1e-300
    r0 = np.max(np.where(pos, s, -np.inf), axis=1, initial=0.0)
    r1 = np.min(np.where(neg, s, np.inf), axis=1, initial=np.inf)
    # rays parallel to an edge and outside it
    flat = ~(pos | neg)
    bad = np.any(flat & (num[None, :] > 1e-14), axis=1)
    r1 = np.where(bad, -np.inf, r1)
    return r0, r1


def polar_region_rule(poly, center, r_lo=0.0, r_hi=np.inf, npoints=12):
    """Quadrature on ``{x in poly : r_lo <= |x - center| <= r_hi}``.

    ``poly`` is convex and counterclockwise. The angular range is split at
    every polygon vertex and at every crossing of the two circles with the
    polygon boundary, so the radial limits are smooth on each piece and a
    tensor Gauss rule converges spectrally even for integrands that are
    only smooth away from ``center``.
    """
    poly = np.asarray(poly, dtype=float)
    c = np.asarray(center, dtype=float)
    if len(poly) < 3 or abs(_signed_area(poly)) < 1e-300:
        return np.empty((0, 2)), np.empty(0)
    scale = float(np.max(np.abs(poly - c)))
    rel = poly - c
    dist = np.hypot(rel[:, 0], rel[:, 1])
    inside = _strictly_inside(poly, c, 1e-13 * scale)
    if inside:
        ref = 0.0
        lo, hi = 0.0, 2 * np.pi
    else:
        g = poly.mean(axis=0) - c
        ref = np.arctan2(g[1], g[0])
    keep = dist > 1e-13 * scale
    ang = [np.arctan2(rel[keep, 1], rel[keep, 0])]
    # circle/edge crossings
    q = np.roll(poly, -1, axis=0)
    for R in (r_lo, r_hi):
        if not (0.0 < R < np.inf):
            continue
        d = q - poly
        A = np.einsum("kd,kd->k", d, d)
        B = 2 * np.einsum("kd,kd->k", rel, d)
        C = dist**2 - R * R
        disc = B * B - 4 * A * C
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        ok &= A > 0
        A = np.where(ok, A, 1.0)
        for sgn in (-1.0, 1.0):
            s = (-B + sgn * sq) / (2 * A)
            hit = ok & (s > 0) & (s < 1)
            p = rel[hit] + s[hit, None] * d[hit]
            ang.append(np.arctan2(p[:, 1], p[:, 0]))
    ang = np.concatenate(ang)
    if inside:
        br = np.concatenate([[0.0], np.sort(np.mod(ang, 2 * np.pi)), [2 * np.pi]])
    else:
        relang = np.mod(ang - ref + np.pi, 2 * np.pi) - np.pi
        lo, hi = relang.min(), relang.max()
        br = np.sort(np.concatenate([[lo, hi], relang])) + ref
    br = br[np.concatenate([[True], np.diff(br) > 1e-14])]
    x, w = _gauss01(int(npoints))
    pts, wts = [], []
    for a, b in zip(br[:-1], br[1:]):
        phi = a + (b - a) * x
        wphi = (b - a) * w
        dirs = np.column_stack([np.cos(phi), np.sin(phi)])
        r0, r1 = _ray_interval(c, dirs, poly)
        r0 = np.maximum(r0, r_lo)
        r1 = np.minimum(r1, r_hi)
        ok = r1 > r0
        if not ok.any():
            continue
        r = r0[ok, None] + (r1 - r0)[ok, None] * x[None, :]
        wr = (r1 - r0)[ok, None] * w[None, :] * r * wphi[ok, None]
        pts.append(c + r[..., None] * dirs[ok, None, :])
        wts.append(wr)
    if not pts:
        return np.empty((0, 2)), np.empty(0)
    return np.concatenate([p.reshape(-1, 2) for p in pts]), np.concatenate([v.ravel() for v in wts])


def _signed_area(p):
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def _strictly_inside(poly, p, tol):
    q = np.roll(poly, -1, axis=0)
    d = q - poly
    cr = d[:, 0] * (p[1] - poly[:, 1]) - d[:, 1] * (p[0] - poly[:, 0])
    return bool(np.all(cr > tol * np.hypot(d[:, 0], d[:, 1])))
