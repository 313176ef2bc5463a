"""Inequality constants as extreme generalized eigenvalues over DG spaces.

Every estimator maximises a Rayleigh quotient ``v^T A v / v^T B v`` with
``B`` positive definite:

==================  =====================================  ==========================
constant            numerator ``A``                        denominator ``B``
==================  =====================================  ==========================
element trace       edge mass on ``e``                     ``|e|^-1 M_tau + |e| S_tau``
global trace        boundary edge mass                     ``M + S + J``
Poincare            ``M``                                  ``S + J + F``
strip               mass on the distance-``delta`` strip   ``delta (M + S + J)``
==================  =====================================  ==========================

``M``, ``S`` and ``J`` are the block-diagonal mass, broken stiffness and
``|e|^-1``-weighted jump penalty; ``F`` is the seminorm form (edge mass
for ``f1``, rank-one ``g g^T`` for ``f2``/``f3``). Since the DG spaces
are finite dimensional, the values are lower bounds of the sups over
the full broken space.
"""

import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import __version__
from .broken_norms import SeminormSpec, parse_seminorm, seminorm
from .dg_space import barycentric, basis, basis_dlam, constant_dg, edge_barycentric, n_local
from .errors import NoConvergence, SeminormKillsNoConstants, SingularB
from .field_constructions import strip_quadrature
from .mesh_core import build_mesh, mesh_regularity
from .quadrature import edge_rule, triangle_rule

DENSE_LIMIT = 600
DEFAULT_TOL = 1e-9
MAX_ITER = 5000


# ---------------------------------------------------------------------------
# assembly


def _block_diag(blocks):
    m, n, _ = blocks.shape
    rows = (np.arange(m)[:, None, None] * n + np.arange(n)[None, :, None]).repeat(n, axis=2)
    cols = np.swapaxes(rows, 1, 2)
    return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(m * n, m * n))


def _sym(A):
    A = sp.csr_matrix(A)
    return ((A + A.T) * 0.5).tocsr()


def mass_matrix(mesh, degree):
    lam, w = triangle_rule(4)
    phi = basis(degree, lam)
    local = np.einsum("q,qi,qj->ij", w, phi, phi)
    return _block_diag(mesh.cell_areas[:, None, None] * local[None])


def stiffness_matrix(mesh, degree):
    lam, w = triangle_rule(4)
    dphi = basis_dlam(degree, lam)  # (q, n, 3)
    grads = np.einsum("qnk,mkd->mqnd", dphi, mesh.lambda_gradients)
    local = np.einsum("q,mqid,mqjd->mij", w, grads, grads)
    return _block_diag(mesh.cell_areas[:, None, None] * local)


def _edge_basis(mesh, degree, edges, side, t):
    lam = edge_barycentric(mesh, edges, side, t)
    return basis(degree, lam)  # (ne, nt, nloc)


def jump_matrix(mesh, degree, jump_exponent=-1.0):
    """``sum_e |e|^p int_e [u]^2`` over interior edges, ``p = jump_exponent``."""
    nloc = n_local(degree)
    ie = mesh.interior_edges
    t, w = edge_rule(3)
    b0 = _edge_basis(mesh, degree, ie, 0, t)
    b1 = _edge_basis(mesh, degree, ie, 1, t)
    B = np.concatenate([b0, -b1], axis=2)  # (ne, nt, 2 nloc)
    L = mesh.edge_lengths[ie]
    local = (L ** (1.0 + jump_exponent))[:, None, None] * np.einsum("q,eqi,eqj->eij", w, B, B)
    c0, c1 = mesh.edge_cells[ie, 0], mesh.edge_cells[ie, 1]
    dofs = np.concatenate(
        [c0[:, None] * nloc + np.arange(nloc), c1[:, None] * nloc + np.arange(nloc)], axis=1
    )
    rows = np.repeat(dofs[:, :, None], 2 * nloc, axis=2)
    cols = np.swapaxes(rows, 1, 2)
    n = mesh.n_cells * nloc
    return _sym(sp.csr_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)))


def boundary_mass_matrix(mesh, degree, edges=None):
    """``sum_e int_e u^2`` over boundary ``edges`` (all boundary edges by default)."""
    nloc = n_local(degree)
    be = mesh.boundary_edges if edges is None else np.asarray(edges)
    t, w = edge_rule(3)
    b = _edge_basis(mesh, degree, be, 0, t)
    local = mesh.edge_lengths[be][:, None, None] * np.einsum("q,eqi,eqj->eij", w, b, b)
    dofs = mesh.edge_cells[be, 0][:, None] * nloc + np.arange(nloc)
    rows = np.repeat(dofs[:, :, None], nloc, axis=2)
    cols = np.swapaxes(rows, 1, 2)
    n = mesh.n_cells * nloc
    return _sym(sp.csr_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)))


def load_vector(mesh, degree, spec):
    """Coefficients ``g`` with ``g . v = int_G u`` (``f2``) or ``int_w u`` (``f3``)."""
    nloc = n_local(degree)
    g = np.zeros(mesh.n_cells * nloc)
    r = np.asarray(spec.region)
    if spec.kind == "f3":
        lam, w = triangle_rule(4)
        local = w @ basis(degree, lam)
        for c in r:
            g[c * nloc : (c + 1) * nloc] += mesh.cell_areas[c] * local
    else:
        t, w = edge_rule(3)
        b = _edge_basis(mesh, degree, r, 0, t)
        local = mesh.edge_lengths[r][:, None] * np.einsum("q,eqi->ei", w, b)
        for c, row in zip(mesh.edge_cells[r, 0], local):
            g[c * nloc : (c + 1) * nloc] += row
    return g


def seminorm_matrix(mesh, degree, spec, dense_rank_one=False):
    """Form of ``f(u)^2``: edge mass for ``f1``, ``g g^T`` for ``f2``/``f3``.

    The rank-one form is returned as a factor ``(n, 1)`` unless
    ``dense_rank_one`` asks for the assembled sparse outer product.
    """
    spec.validate(mesh)
    if spec.kind == "f1":
        return boundary_mass_matrix(mesh, degree, spec.region)
    g = load_vector(mesh, degree, spec)
    if not dense_rank_one:
        return g[:, None]
    nz = np.flatnonzero(g)
    G = sp.coo_matrix(
        (np.outer(g[nz], g[nz]).ravel(), (np.repeat(nz, len(nz)), np.tile(nz, len(nz)))),
        shape=(len(g), len(g)),
    )
    return G.tocsr()


def strip_mass_matrix(mesh, degree, delta):
    nloc = n_local(degree)
    cells, pts, w = strip_quadrature(mesh, delta, degree=2 * degree)
    phi = basis(degree, barycentric(mesh, cells, pts))  # (n, nloc)
    vals = w[:, None, None] * phi[:, :, None] * phi[:, None, :]
    rows = np.repeat((cells[:, None] * nloc + np.arange(nloc))[:, :, None], nloc, axis=2)
    cols = np.swapaxes(rows, 1, 2)
    n = mesh.n_cells * nloc
    return _sym(sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)))


@dataclass(frozen=True)
class Forms:
    """Assembled bilinear forms of one mesh and degree."""

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    jump: sp.csr_matrix

    @property
    def h1h(self):
        return (self.mass + self.stiffness + self.jump).tocsr()


def assemble(mesh, degree, jump_exponent=-1.0):
    return Forms(
        mass_matrix(mesh, degree),
        stiffness_matrix(mesh, degree),
        jump_matrix(mesh, degree, jump_exponent),
    )


# ---------------------------------------------------------------------------
# eigen solver


@dataclass(frozen=True)
class SymmetricPair:
    A: object
    B: object
    kernel: np.ndarray = None

    def __post_init__(self):
        if self.A.shape != self.B.shape or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("A and B must be square and of equal size")

    @property
    def n(self):
        return self.A.shape[0]

    def quotient(self, v):
        return float(v @ (self.A @ v)) / float(v @ (self.B @ v))


@dataclass(frozen=True)
class EigenResult:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int


class LowRankSum:
    """Symmetric ``base + G G^T`` kept in factored form (``G`` has few columns)."""

    def __init__(self, base, G):
        self.base = sp.csr_matrix(base)
        self.G = np.asarray(G, dtype=float).reshape(self.base.shape[0], -1)

    @property
    def shape(self):
        return self.base.shape

    def __matmul__(self, x):
        return self.base @ x + self.G @ (self.G.T @ x)

    def __mul__(self, s):
        return LowRankSum(self.base * s, self.G * np.sqrt(s))

    __rmul__ = __mul__

    def plus(self, other, s=1.0):
        """``self + s * other`` for a sparse ``other``."""
        return LowRankSum(self.base + s * sp.csr_matrix(other), self.G)

    def toarray(self):
        return self.base.toarray() + self.G @ self.G.T


def _dense(M):
    if isinstance(M, LowRankSum) or sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


def _plus(A, B, s):
    """``A + s B`` with ``s >= 0``, keeping low-rank parts factored."""
    if s < 0 and (isinstance(A, LowRankSum) or isinstance(B, LowRankSum)):
        raise ValueError("negative combinations of low-rank forms are not supported")
    parts = [(A, 1.0), (B, s)]
    base = sum(sp.csr_matrix(M.base if isinstance(M, LowRankSum) else M) * c for M, c in parts)
    G = [np.sqrt(c) * M.G for M, c in parts if isinstance(M, LowRankSum)]
    return LowRankSum(base, np.hstack(G)) if G else base


def _factor(K):
    """Solver for ``K x = b``; Sherman-Morrison-Woodbury for a low-rank part."""
    base = K.base if isinstance(K, LowRankSum) else K
    try:
        lu = spla.splu(sp.csc_matrix(base))
    except RuntimeError as exc:
        raise SingularB(f"matrix is singular: {exc}") from None
    if not isinstance(K, LowRankSum) or K.G.shape[1] == 0:
        return lu.solve
    G = K.G
    Y = lu.solve(G)
    cap = np.linalg.inv(np.eye(G.shape[1]) + G.T @ Y)

    def solve(b):
        y = lu.solve(b)
        return y - Y @ (cap @ (G.T @ y))

    return solve


def _op(M):
    n = M.shape[0]
    return spla.LinearOperator((n, n), matvec=lambda x: M @ x, dtype=float)


def _residual(A, B, lam, v):
    r = A @ v - lam * (B @ v)
    return float(np.linalg.norm(r) / np.linalg.norm(v))


def _normalise(v, B):
    v = v / np.sqrt(float(v @ (B @ v)))
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def _complement(Z, B):
    """Orthonormal basis of the ``B``-orthogonal complement of ``span(Z)``."""
    return sla.null_space((B @ Z).T)


def gen_eig_extreme(pair, which="largest", tol=DEFAULT_TOL, seed=0, max_iter=MAX_ITER):
    """Extreme eigenpair of ``A v = lam B v``.

    Parameters
    ----------
    pair : SymmetricPair
        ``which="largest"`` needs ``B`` positive definite.
        ``which="smallest_nonzero"`` needs ``B`` positive definite on the
        complement of ``pair.kernel`` (columns spanning the kernel of
        ``A``), which is deflated ``B``-orthogonally.
        ``A`` and ``B`` may be sparse, dense or :class:`LowRankSum`.
    tol : float
        Bound on ``||A v - lam B v|| / ||v||``.

    Returns
    -------
    EigenResult
        ``iterations`` counts operator applications of the iterative
        solver (0 for the dense path).

    Raises
    ------
    SingularB, NoConvergence
    """
    if which not in ("largest", "smallest_nonzero"):
        raise ValueError(f"unknown selector {which!r}")
    n = pair.n
    Z = None if pair.kernel is None else np.asarray(pair.kernel, dtype=float).reshape(n, -1)
    if n <= DENSE_LIMIT:
        return _gen_eig_dense(_dense(pair.A), _dense(pair.B), which, Z, tol)
    return _gen_eig_sparse(pair.A, pair.B, which, Z, tol, seed, max_iter)


def _gen_eig_dense(A, B, which, Z, tol):
    C = None
    if which == "smallest_nonzero" and Z is not None and Z.shape[1]:
        C = _complement(Z, B)
        A_, B_ = C.T @ A @ C, C.T @ B @ C
    else:
        A_, B_ = A, B
    try:
        lam, V = sla.eigh(A_, B_)
    except np.linalg.LinAlgError as exc:
        raise SingularB(f"denominator form is not positive definite: {exc}") from None
    k = int(np.argmax(lam)) if which == "largest" else int(np.argmin(lam))
    # among numerically tied eigenvalues report the smallest
    tied = np.flatnonzero(np.abs(lam - lam[k]) <= tol * max(1.0, abs(lam[k])))
    k = int(tied[np.argmin(lam[tied])])
    v = V[:, k] if C is None else C @ V[:, k]
    v = _normalise(v, B)
    value = float(lam[k])
    res = _residual(A, B, value, v)
    if res > tol:
        raise NoConvergence(f"dense residual {res:.3e} exceeds tolerance {tol:.1e}")
    return EigenResult(value, v, res, 0)


class _Counter:
    def __init__(self, op):
        self.op = op
        self.count = 0

    def __call__(self, x):
        self.count += 1
        return self.op(x)


def _gen_eig_sparse(A, B, which, Z, tol, seed, max_iter):
    n = A.shape[0]
    v0 = np.random.default_rng(seed).standard_normal(n)
    if which == "largest":
        solve = _factor(B)
        # mode-2 Lanczos on B^-1 A, orthogonal in the B inner product
        mv = _Counter(lambda x: A @ x)
        Aop = spla.LinearOperator((n, n), matvec=mv, dtype=float)
        Minv = spla.LinearOperator((n, n), matvec=solve, dtype=float)
        try:
            lam, V = spla.eigsh(
                Aop, k=1, M=_op(B), Minv=Minv, which="LA", v0=v0, tol=tol * 1e-3, maxiter=max_iter
            )
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(f"no convergence after {max_iter} iterations: {exc}") from None
        value, v = float(lam[0]), V[:, 0]
    else:
        kz = 0 if Z is None else Z.shape[1]
        sigma = -1.0
        mv = _Counter(_factor(_plus(A, B, -sigma)))
        OPinv = spla.LinearOperator((n, n), matvec=mv, dtype=float)
        try:
            lam, V = spla.eigsh(
                _op(A), k=kz + 1, M=_op(B), sigma=sigma, OPinv=OPinv, which="LM", v0=v0,
                tol=tol * 1e-3, maxiter=max_iter,
            )
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(f"no convergence after {max_iter} iterations: {exc}") from None
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]
        keep = list(range(len(lam)))
        if kz:
            # drop the kz eigenvectors lying closest to the kernel
            ZB = Z.T @ (B @ V)
            gram = np.linalg.solve(Z.T @ (B @ Z), ZB)
            in_kernel = np.einsum("ij,ij->j", ZB, gram)
            keep = sorted(np.argsort(in_kernel)[: len(lam) - kz])
        value, v = float(lam[keep[0]]), V[:, keep[0]]
    v = _normalise(v, B)
    res = _residual(A, B, value, v)
    if res > tol:
        raise NoConvergence(f"residual {res:.3e} exceeds tolerance {tol:.1e}")
    return EigenResult(value, v, res, mv.count)


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class ConstantEstimate:
    """``constant`` equals ``result.value`` or its reciprocal when ``reciprocal``."""

    constant: float
    result: EigenResult
    pair: SymmetricPair
    reciprocal: bool = False

    def quotient(self, v):
        """The constant's Rayleigh quotient evaluated at coefficient vector ``v``."""
        q = self.pair.quotient(np.asarray(v, dtype=float))
        return 1.0 / q if self.reciprocal else q


def element_trace_constant(cell, edge=0, degree=1):
    """Sharp constant of ``int_e u^2 <= C (|e|^-1 int u^2 + |e| int |grad u|^2)`` on one cell.

    Parameters
    ----------
    cell : array_like, shape (3, 2)
    edge : int
        Local edge index; edge ``k`` is opposite vertex ``k``.
    """
    cell = np.asarray(cell, dtype=float)
    mesh = build_mesh(cell, np.array([[0, 1, 2]]))
    k = int(edge)
    if not 0 <= k <= 2:
        raise ValueError("edge must be 0, 1 or 2")
    # build_mesh may reorient; find the mesh edge opposite the requested vertex
    v = cell[k]
    local = int(np.flatnonzero(np.all(mesh.cell_coords[0] == v, axis=1))[0])
    e = int(mesh.cell_edges[0, local])
    L = float(mesh.edge_lengths[e])
    A = boundary_mass_matrix(mesh, degree, [e])
    B = mass_matrix(mesh, degree) / L + L * stiffness_matrix(mesh, degree)
    pair = SymmetricPair(_dense(A), _dense(B))
    res = gen_eig_extreme(pair, "largest")
    return ConstantEstimate(res.value, res, pair)


def global_trace_constant(mesh, degree=1, tol=DEFAULT_TOL, jump_exponent=-1.0, seed=0):
    """``C*^2 = sup boundary_l2_sq / h1h_norm^2``; returns the squared constant."""
    forms = assemble(mesh, degree, jump_exponent)
    pair = SymmetricPair(boundary_mass_matrix(mesh, degree), forms.h1h)
    res = gen_eig_extreme(pair, "largest", tol, seed)
    return ConstantEstimate(res.value, res, pair)


def poincare_constant(mesh, degree, spec, tol=DEFAULT_TOL, jump_exponent=-1.0, seed=0):
    """``C* = sup l2_sq / (broken_h1_sq + jump_sq + f(u)^2)``.

    Raises
    ------
    SeminormKillsNoConstants
        ``f`` vanishes on the constant 1, so the quotient is unbounded.
    """
    spec.validate(mesh)
    if seminorm(constant_dg(mesh, 1.0, degree), spec) <= 1e-12:
        raise SeminormKillsNoConstants(f"{spec.kind} vanishes on constants")
    forms = assemble(mesh, degree, jump_exponent)
    F = seminorm_matrix(mesh, degree, spec)
    base = (forms.stiffness + forms.jump).tocsr()
    den = LowRankSum(base, F) if isinstance(F, np.ndarray) else (base + F).tocsr()
    # C* = 1 / lambda_min(den, mass); mass is definite, den is definite iff f sees constants
    pair = SymmetricPair(den, forms.mass)
    res = gen_eig_extreme(pair, "smallest_nonzero", tol, seed)
    if not res.value > 0:
        raise SeminormKillsNoConstants(f"{spec.kind} leaves a nontrivial kernel")
    return ConstantEstimate(1.0 / res.value, res, pair, reciprocal=True)


def strip_constant(mesh, degree, delta, tol=DEFAULT_TOL, jump_exponent=-1.0, seed=0):
    """``C* = sup strip_l2_sq / (delta h1h_norm^2)``."""
    forms = assemble(mesh, degree, jump_exponent)
    pair = SymmetricPair(strip_mass_matrix(mesh, degree, delta), delta * forms.h1h)
    res = gen_eig_extreme(pair, "largest", tol, seed)
    return ConstantEstimate(res.value, res, pair)


# ---------------------------------------------------------------------------
# sweeps

CSV_HEADER = "level,cells,K,thetaK,qu,constant,iters,residual"


@dataclass(frozen=True)
class SweepRow:
    level: int
    cells: int
    K: float
    thetaK: float
    qu: float
    constant: float
    iters: int
    residual: float

    def csv(self):
        return ",".join(
            [str(self.level), str(self.cells)]
            + [repr(float(x)) for x in (self.K, self.thetaK, self.qu, self.constant)]
            + [str(self.iters), repr(float(self.residual))]
        )


@dataclass(frozen=True)
class ConstantSweep:
    estimator: str
    family: tuple
    rows: tuple
    params: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def band(self):
        c = self.column("constant")
        return float(c.max() / c.min())

    def config(self):
        return {
            "estimator": self.estimator,
            "family": [json.loads(f.to_json()) for f in self.family],
            "params": self.params,
        }

    def to_csv(self, seed=0):
        return write_csv(CSV_HEADER, [r.csv() for r in self.rows], self.config(), seed)


def config_hash(config):
    text = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_csv(header, lines, config, seed=0):
    buf = io.StringIO()
    buf.write(header + "\n")
    for ln in lines:
        buf.write(ln + "\n")
    buf.write(f"# version={__version__}, seed={seed}, config-hash={config_hash(config)}\n")
    return buf.getvalue()


ESTIMATORS = ("trace", "poincare", "strip")


def estimate(mesh, estimator, params):
    """Dispatch one estimator by name; ``params`` holds degree, tol, seminorm, delta."""
    degree = int(params.get("degree", 1))
    tol = float(params.get("tol", DEFAULT_TOL))
    jexp = float(params.get("jump_exponent", -1.0))
    seed = int(params.get("seed", 0))
    if estimator == "trace":
        return global_trace_constant(mesh, degree, tol, jexp, seed)
    if estimator == "poincare":
        spec = params["seminorm"]
        if isinstance(spec, str):
            spec = parse_seminorm(spec, mesh)
        elif callable(spec):
            spec = spec(mesh)
        return poincare_constant(mesh, degree, spec, tol, jexp, seed)
    if estimator == "strip":
        return strip_constant(mesh, degree, float(params["delta"]), tol, jexp, seed)
    raise ValueError(f"unknown estimator {estimator!r}")


def _row(args):
    member, estimator, params = args
    mesh = member.build() if hasattr(member, "build") else member
    est = estimate(mesh, estimator, params)
    reg = mesh_regularity(mesh)
    level = getattr(member, "level", 0)
    return SweepRow(
        int(level), mesh.n_cells, reg.K, reg.theta_K, reg.quasi_uniformity,
        est.constant, est.result.iterations, est.result.residual,
    )


def sweep(family, estimator, params=None, jobs=1):
    """Estimate one constant on every family member.

    ``family`` is a list of :class:`~broken_sobolev.mesh_gen.FamilySpec`
    (or meshes). With ``jobs > 1`` members run in worker processes; rows
    come back in family order regardless.
    """
    params = dict(params or {})
    work = [(m, estimator, params) for m in family]
    if jobs > 1 and len(work) > 1 and not callable(params.get("seminorm")):
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as ex:
            rows = list(ex.map(_row, work))
    else:
        rows = [_row(w) for w in work]
    shown = {k: (v if not hasattr(v, "kind") else f"{v.kind}:{len(v.region)}") for k, v in params.items()}
    return ConstantSweep(estimator, tuple(f for f in family if hasattr(f, "to_json")), tuple(rows), shown)


__all__ = [
    "SeminormSpec",
    "SymmetricPair",
    "LowRankSum",
    "EigenResult",
    "ConstantEstimate",
    "ConstantSweep",
    "SweepRow",
    "assemble",
    "mass_matrix",
    "stiffness_matrix",
    "jump_matrix",
    "boundary_mass_matrix",
    "seminorm_matrix",
    "strip_mass_matrix",
    "load_vector",
    "gen_eig_extreme",
    "element_trace_constant",
    "global_trace_constant",
    "poincare_constant",
    "strip_constant",
    "sweep",
    "estimate",
    "write_csv",
    "config_hash",
    "CSV_HEADER",
]
