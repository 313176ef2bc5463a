"""Independent reference computations for cross-checking the main routines.

Nothing here calls the assembly, quadrature or eigen-solver code of the
package. Element matrices are integrated exactly in a monomial basis of
reference coordinates, and symmetric-definite eigenproblems are solved by
a hand-written Cholesky reduction plus cyclic Jacobi rotations.
"""

from math import factorial

import numpy as np
from numpy.polynomial import Polynomial


def reference_monomial_integral(a, b):
    """``int over {xi, eta >= 0, xi + eta <= 1} of xi^a eta^b``."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def monomial_exponents(degree):
    return [(i - j, j) for i in range(degree + 1) for j in range(i + 1)]


def _affine(tri):
    tri = np.asarray(tri, dtype=float)
    J = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    return tri[0], J


def element_matrices(tri, degree):
    """Mass and stiffness matrices in the reference-monomial basis, exactly."""
    _, J = _affine(tri)
    det = abs(np.linalg.det(J))
    G = np.linalg.inv(J) @ np.linalg.inv(J).T  # grad_x = J^-T grad_xi
    exps = monomial_exponents(degree)
    n = len(exps)
    M = np.zeros((n, n))
    S = np.zeros((n, n))
    for i, (a1, b1) in enumerate(exps):
        for j, (a2, b2) in enumerate(exps):
            M[i, j] = det * reference_monomial_integral(a1 + a2, b1 + b2)
            # derivative terms: d_xi (coef a, exps a-1,b), d_eta (coef b, exps a,b-1)
            d1 = [(a1, a1 - 1, b1), (b1, a1, b1 - 1)]
            d2 = [(a2, a2 - 1, b2), (b2, a2, b2 - 1)]
            s = 0.0
            for p, (c1, x1, y1) in enumerate(d1):
                for q, (c2, x2, y2) in enumerate(d2):
                    if c1 and c2:
                        s += G[p, q] * c1 * c2 * reference_monomial_integral(x1 + x2, y1 + y2)
            S[i, j] = det * s
    return M, S


def edge_matrix(tri, edge, degree):
    """``int_e phi_i phi_j`` on the edge opposite local vertex ``edge``."""
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tri = np.asarray(tri, dtype=float)
    a, b = (edge + 1) % 3, (edge + 2) % 3
    length = float(np.hypot(*(tri[b] - tri[a])))
    xi = Polynomial([ref[a, 0], ref[b, 0] - ref[a, 0]])
    eta = Polynomial([ref[a, 1], ref[b, 1] - ref[a, 1]])
    exps = monomial_exponents(degree)
    traces = [xi**p * eta**q for p, q in exps]
    n = len(exps)
    E = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            anti = (traces[i] * traces[j]).integ()
            E[i, j] = length * (anti(1.0) - anti(0.0))
    return E, length


def cholesky_lower(B):
    B = np.array(B, dtype=float)
    n = len(B)
    L = np.zeros_like(B)
    for j in range(n):
        d = B[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0:
            raise ValueError("matrix is not positive definite")
        L[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            L[i, j] = (B[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def _forward(L, X):
    X = np.array(X, dtype=float)
    for i in range(len(L)):
        X[i] = (X[i] - L[i, :i] @ X[:i]) / L[i, i]
    return X


def jacobi_eigenvalues(A, tol=1e-15, sweeps=100):
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    A = np.array(A, dtype=float)
    n = len(A)
    scale = max(np.abs(A).max(), 1e-300)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-18 * scale:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) if theta else 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                # A <- R^T A R with R the (p, q) rotation
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :], A[q, :] = c * ap - s * aq, s * ap + c * aq
    return np.sort(np.diag(A))


def generalized_eigenvalues(A, B):
    """Eigenvalues of ``A v = lambda B v`` for symmetric ``A`` and SPD ``B``."""
    L = cholesky_lower(B)
    X = _forward(L, A)  # L^-1 A
    C = _forward(L, X.T).T  # L^-1 A L^-T
    return jacobi_eigenvalues(0.5 * (C + C.T))


def element_trace_reference(tri, edge=0, degree=1):
    """Largest ``int_e u^2 / (|e|^-1 ||u||_K^2 + |e| |u|_{1,K}^2)`` over the local space."""
    M, S = element_matrices(tri, degree)
    E, length = edge_matrix(tri, edge, degree)
    return float(generalized_eigenvalues(E, M / length + length * S)[-1])


def linear_norms(tri, values):
    """Closed forms for a linear ``u`` with vertex values ``values`` on one triangle.

    Returns ``(int u^2, int |grad u|^2, [int_e u^2 for the edge opposite each vertex])``.
    """
    tri = np.asarray(tri, dtype=float)
    u = np.asarray(values, dtype=float)
    d1, d2 = tri[1] - tri[0], tri[2] - tri[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    l2 = area / 12.0 * (np.sum(u**2) + np.sum(u) ** 2)
    J = np.column_stack([d1, d2])
    g = np.linalg.solve(J.T, [u[1] - u[0], u[2] - u[0]])
    edges = []
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        L = float(np.hypot(*(tri[b] - tri[a])))
        edges.append(L / 3.0 * (u[a] ** 2 + u[a] * u[b] + u[b] ** 2))
    return float(l2), float(area * g @ g), edges


def segments_cross(p1, p2, q1, q2):
    """Proper crossing of two segments by orientation signs."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 * o2 < 0 and o3 * o4 < 0
