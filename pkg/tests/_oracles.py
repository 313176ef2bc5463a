"""Test-side oracles that share no code path with the routines they check."""

import numpy as np

from broken_sobolev.reference import (  # noqa: F401 - re-exported for the tests
    element_trace_reference,
    generalized_eigenvalues,
    jacobi_eigenvalues,
    linear_norms,
    reference_monomial_integral,
    segments_cross,
)


def brute_force_cut_edges(mesh, point, direction):
    """Edges properly crossed by the line, via segment-segment orientation tests."""
    p = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.hypot(*d)
    span = 10.0 * (np.ptp(mesh.vertices, axis=0).max() + np.abs(mesh.vertices - p).max())
    q1, q2 = p - span * d, p + span * d
    hits = []
    for e, (a, b) in enumerate(mesh.edges):
        if segments_cross(mesh.vertices[a], mesh.vertices[b], q1, q2):
            hits.append(e)
    return hits


def shoelace(poly):
    x, y = np.asarray(poly, dtype=float).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def triangle_polynomial_integral(tri, coeffs):
    """Exact ``int_T sum c_ab x^a y^b`` by expanding in reference coordinates.

    ``coeffs`` maps ``(a, b)`` to the coefficient.
    """
    tri = np.asarray(tri, dtype=float)
    v0, d1, d2 = tri[0], tri[1] - tri[0], tri[2] - tri[0]
    det = abs(d1[0] * d2[1] - d1[1] * d2[0])
    # x = v0x + d1x xi + d2x eta, as a 2-D coefficient array in (xi, eta)
    X = np.array([[v0[0], d2[0]], [d1[0], 0.0]])
    Y = np.array([[v0[1], d2[1]], [d1[1], 0.0]])
    total = 0.0
    for (a, b), c in coeffs.items():
        poly = np.array([[1.0]])
        for _ in range(a):
            poly = _mul2d(poly, X)
        for _ in range(b):
            poly = _mul2d(poly, Y)
        for i in range(poly.shape[0]):
            for j in range(poly.shape[1]):
                if poly[i, j]:
                    total += c * poly[i, j] * reference_monomial_integral(i, j)
    return det * total


def _mul2d(p, q):
    out = np.zeros((p.shape[0] + q.shape[0] - 1, p.shape[1] + q.shape[1] - 1))
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            if p[i, j]:
                out[i : i + q.shape[0], j : j + q.shape[1]] += p[i, j] * q
    return out
