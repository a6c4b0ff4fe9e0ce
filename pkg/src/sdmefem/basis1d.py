"""Construction of the 1D expansion bases and their transforms.

Five families are supported: the nodal Lagrange basis on Gauss-Lobatto
points, the standard Jacobi modal basis, and three modified modal bases
(tags ``SDME_M``, ``SDME_K``, ``SDME_H``) obtained by simultaneously
diagonalizing the internal mass/stiffness blocks and re-orthogonalizing
the two vertex functions against the internal ones in the L2, energy, or
Helmholtz (K + lambda*M) inner product.

All modified bases are stored as a dense transform ``T`` whose rows give
the new functions in terms of the standard modal ones, so downstream code
is independent of the basis kind.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .densela import cond2_spd, spd_solve, sym_eig
from .quadrature import QuadratureRule, gauss_rule, gll_rule

__all__ = [
    "BasisKind",
    "Basis1D",
    "jacobi_eval",
    "jacobi_deriv",
    "modal_eval",
    "lagrange_eval",
    "lagrange_basis",
    "modal_basis",
    "build_basis",
    "matrices_1d",
    "simultaneous_diagonalize",
    "minimum_energy_coeffs",
    "conditioning_report",
    "sparsity_report",
]

MODAL_TAGS = ("ModalJacobi", "SDME_M", "SDME_K", "SDME_H")
ALL_TAGS = ("LagrangeGLL",) + MODAL_TAGS


@dataclass(frozen=True)
class BasisKind:
    """Basis family tag plus the parameters that shape the modified bases.

    ``k`` balances the condition numbers of the diagonalized internal
    mass/stiffness blocks (k=0 makes the internal mass block the identity,
    k=1 the internal stiffness block). ``lam`` is the Helmholtz weight for
    ``SDME_H`` and mirrors the mass scaling of an implicit time step.
    """

    tag: str
    jacobi_alpha: float = 1.0
    jacobi_beta: float = 1.0
    k: float = 0.5
    lam: float = 100.0

    def __post_init__(self):
        if self.tag not in ALL_TAGS:
            raise ValueError(f"unknown basis tag {self.tag!r}; expected one of {ALL_TAGS}")
        if not 0.0 <= self.k <= 1.0:
            raise ValueError(f"k must lie in [0, 1], got {self.k}")
        if self.lam < 0.0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    @property
    def is_nodal(self) -> bool:
        return self.tag == "LagrangeGLL"

    @property
    def symmetric_weights(self) -> bool:
        return self.jacobi_alpha == self.jacobi_beta


@dataclass(frozen=True)
class Basis1D:
    """A 1D basis of order P with tabulated values at a quadrature rule.

    Functions are ordered [left vertex, right vertex, internal 2..P].
    ``transform`` expresses every function in the standard modal basis;
    it is the identity for ``ModalJacobi``. ``internal_parity`` gives the
    reflection parity (+1 even, -1 odd) of each internal function when the
    Jacobi weights are symmetric, which is what makes sign-based edge
    orientation possible; it is None for the nodal basis (orientation is
    handled by index reversal) and for non-symmetric weights.
    """

    P: int
    kind: BasisKind
    transform: np.ndarray
    rule: QuadratureRule
    values: np.ndarray  # (P+1, n_points)
    derivs: np.ndarray
    internal_parity: np.ndarray | None
    gll_nodes: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.P + 1

    @property
    def boundary_index(self) -> np.ndarray:
        return np.array([0, 1])

    @property
    def internal_index(self) -> np.ndarray:
        return np.arange(2, self.P + 1)

    def eval(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Values and derivatives of all functions at arbitrary points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind.is_nodal:
            v, d = lagrange_eval(self.gll_nodes, x)
            return _reorder_nodal(v), _reorder_nodal(d)
        v, d = modal_eval(self.P, self.kind.jacobi_alpha, self.kind.jacobi_beta, x)
        return self.transform @ v, self.transform @ d

    def with_rule(self, rule: QuadratureRule) -> "Basis1D":
        """Same basis tabulated at a different quadrature rule."""
        v, d = self.eval(rule.points)
        return replace(self, rule=rule, values=v, derivs=d)


def jacobi_eval(n: int, alpha: float, beta: float, x) -> np.ndarray:
    """Jacobi polynomial P_n^{alpha,beta}(x) by the three-term recurrence."""
    if n < 0:
        raise ValueError("polynomial order must be >= 0")
    if alpha <= -1 or beta <= -1:
        raise ValueError("Jacobi weights must be > -1")
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    if n == 0:
        return p0
    p1 = 0.5 * (alpha + beta + 2.0) * x + 0.5 * (alpha - beta)
    for m in range(1, n):
        s = 2 * m + alpha + beta
        a1 = 2.0 * (m + 1) * (m + alpha + beta + 1) * s
        a2 = (s + 1) * (alpha**2 - beta**2)
        a3 = s * (s + 1) * (s + 2)
        a4 = 2.0 * (m + alpha) * (m + beta) * (s + 2)
        p0, p1 = p1, ((a2 + a3 * x) * p1 - a4 * p0) / a1
    return p1


def jacobi_deriv(n: int, alpha: float, beta: float, x) -> np.ndarray:
    """First derivative of P_n^{alpha,beta} at x."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    return 0.5 * (n + alpha + beta + 1) * jacobi_eval(n - 1, alpha + 1, beta + 1, x)


def modal_eval(P: int, alpha: float, beta: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Standard modal basis values/derivatives, shape (P+1, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.empty((P + 1, x.size))
    d = np.empty_like(v)
    v[0], d[0] = 0.5 * (1.0 - x), -0.5 * np.ones_like(x)
    if P >= 1:
        v[1], d[1] = 0.5 * (1.0 + x), 0.5 * np.ones_like(x)
    bubble = 0.25 * (1.0 - x) * (1.0 + x)
    for p in range(2, P + 1):
        jp = jacobi_eval(p - 2, alpha, beta, x)
        v[p] = bubble * jp
        d[p] = -0.5 * x * jp + bubble * jacobi_deriv(p - 2, alpha, beta, x)
    return v, d


def lagrange_eval(nodes: np.ndarray, x) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange polynomials on the given nodes, in node order.

    Uses the direct product formulas, which stay exact at the nodes
    (collocation property) and are robust for the small orders used here.
    """
    nodes = np.asarray(nodes, dtype=float)
    if len(np.unique(nodes)) != nodes.size:
        raise ValueError("Lagrange nodes must be distinct")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.size
    v = np.ones((n, x.size))
    d = np.zeros((n, x.size))
    for a in range(n):
        for b in range(n):
            if b != a:
                v[a] *= (x - nodes[b]) / (nodes[a] - nodes[b])
        for c in range(n):
            if c == a:
                continue
            term = np.ones_like(x) / (nodes[a] - nodes[c])
            for b in range(n):
                if b != a and b != c:
                    term *= (x - nodes[b]) / (nodes[a] - nodes[b])
            d[a] += term
    return v, d


def _reorder_nodal(rows: np.ndarray) -> np.ndarray:
    """Node order [x_0.. x_P] -> function order [left, right, interior]."""
    n = rows.shape[0]
    order = [0, n - 1] + list(range(1, n - 1))
    return rows[order]


def matrices_1d(basis: Basis1D, rule: QuadratureRule | None = None, lam: float | None = None):
    """1D mass, stiffness and effective stiffness K + lambda*M.

    Entries are M_pq = int phi_p phi_q and K_pq = int phi_p' phi_q' over
    [-1, 1], integrated with ``rule`` (defaults to the basis rule).
    """
    if rule is None:
        rule = basis.rule
        v, d = basis.values, basis.derivs
    else:
        v, d = basis.eval(rule.points)
    exactness = 2 * rule.n - (3 if rule.kind == "GaussLobattoLegendre" else 1)
    if exactness < 2 * basis.P:
        warnings.warn(
            f"quadrature exactness {exactness} under-resolves the degree "
            f"{2 * basis.P} mass integrand",
            stacklevel=2,
        )
    w = rule.weights
    m = (v * w) @ v.T
    k = (d * w) @ d.T
    if lam is None:
        lam = basis.kind.lam
    return m, k, k + lam * m


def simultaneous_diagonalize(m_ii: np.ndarray, k_ii: np.ndarray, k: float):
    """Transform Y making the internal mass/stiffness blocks diagonal.

    Two-stage eigen decomposition: whiten the mass block, diagonalize the
    whitened stiffness, then rescale by the generalized eigenvalues so that
    Y M Y^T = diag(L^-k) and Y K Y^T = diag(L^(1-k)). Returns (Y, L) with
    the generalized eigenvalues L ascending.
    """
    m_ii = np.atleast_2d(np.asarray(m_ii, dtype=float))
    k_ii = np.atleast_2d(np.asarray(k_ii, dtype=float))
    lam_m, x = sym_eig(m_ii)
    if lam_m[0] <= 0.0:
        raise ValueError("internal mass block is not SPD")
    xs = x / np.sqrt(lam_m)
    l = xs.T @ k_ii @ xs
    lam_s, z = sym_eig(0.5 * (l + l.T))
    if lam_s[0] <= 0.0:
        raise ValueError("internal stiffness block is not SPD")
    y = (xs @ z @ np.diag(lam_s ** (-0.5 * k))).T
    return y, lam_s


def minimum_energy_coeffs(coupling: np.ndarray, internal: np.ndarray) -> np.ndarray:
    """Vertex-internal orthogonalization coefficients coupling @ internal^-1."""
    coupling = np.atleast_2d(np.asarray(coupling, dtype=float))
    internal = np.atleast_2d(np.asarray(internal, dtype=float))
    return spd_solve(internal, coupling.T).T


def _sd_with_parity(m_ii, k_ii, kpar, split: bool):
    """SD transform, optionally done per reflection-parity block.

    For symmetric Jacobi weights the internal functions have alternating
    parity, so mass/stiffness decouple into even/odd blocks; diagonalizing
    per block keeps every new internal mode at a definite parity, which the
    mesh-level edge/face orientation rules need. Returns (Y, lam, parity).
    """
    n = m_ii.shape[0]
    if not split or n <= 1:
        y, lam = simultaneous_diagonalize(m_ii, k_ii, kpar)
        return y, lam, None
    rows = []
    for par in (0, 1):  # internal slot i holds mode p = i + 2, parity (-1)^i
        idx = np.arange(par, n, 2)
        yb, lb = simultaneous_diagonalize(m_ii[np.ix_(idx, idx)], k_ii[np.ix_(idx, idx)], kpar)
        for j in range(len(idx)):
            row = np.zeros(n)
            row[idx] = yb[j]
            rows.append((lb[j], 1.0 if par == 0 else -1.0, row))
    rows.sort(key=lambda t: t[0])
    lam = np.array([t[0] for t in rows])
    parity = np.array([t[1] for t in rows])
    y = np.array([t[2] for t in rows])
    return y, lam, parity


def lagrange_basis(P: int, rule: QuadratureRule | None = None) -> Basis1D:
    """Nodal Lagrange basis on the P+1 Gauss-Lobatto-Legendre points."""
    return build_basis(P, BasisKind("LagrangeGLL"), rule)


def modal_basis(P: int, alpha: float = 1.0, beta: float = 1.0,
                rule: QuadratureRule | None = None) -> Basis1D:
    """Standard Jacobi modal basis (vertex ramps plus weighted bubbles)."""
    return build_basis(P, BasisKind("ModalJacobi", jacobi_alpha=alpha, jacobi_beta=beta), rule)


def build_basis(P: int, kind: BasisKind, rule: QuadratureRule | None = None) -> Basis1D:
    """Construct any of the five basis kinds at order P.

    The SDME kinds require P >= 2 (at least one internal mode). The
    minimum-energy step is carried out in the diagonalized internal
    coordinates, where the internal Gram matrix of the chosen norm is
    diagonal and the vertex rows follow from a trivial solve.
    """
    if P < 1:
        raise ValueError("polynomial order must be >= 1")
    sdme = kind.tag.startswith("SDME")
    if sdme and P < 2:
        raise ValueError(f"{kind.tag} needs P >= 2 (no internal modes at P={P})")
    if rule is None:
        rule = gauss_rule(P + 2)

    if kind.is_nodal:
        nodes = gll_rule(P + 1).points
        v, d = lagrange_eval(nodes, rule.points)
        v, d = _reorder_nodal(v), _reorder_nodal(d)
        psi, _ = modal_eval(P, kind.jacobi_alpha, kind.jacobi_beta, nodes)
        t = _reorder_nodal(np.eye(P + 1)) @ np.linalg.inv(psi.T)
        return Basis1D(P, kind, t, rule, v, d, None, gll_nodes=nodes)

    alpha, beta = kind.jacobi_alpha, kind.jacobi_beta
    parity = None
    if kind.symmetric_weights and P >= 2:
        parity = np.array([(-1.0) ** p for p in range(2, P + 1)])
    t = np.eye(P + 1)

    if sdme:
        quad = gauss_rule(P + 2)
        v, d = modal_eval(P, alpha, beta, quad.points)
        w = quad.weights
        m = (v * w) @ v.T
        kmat = (d * w) @ d.T
        y, _, parity = _sd_with_parity(m[2:, 2:], kmat[2:, 2:], kind.k, kind.symmetric_weights)
        if kind.tag == "SDME_M":
            a = m
        elif kind.tag == "SDME_K":
            a = kmat
        else:
            a = kmat + kind.lam * m
        a_vi = a[:2, 2:] @ y.T
        a_ii = y @ a[2:, 2:] @ y.T
        alpha_me = minimum_energy_coeffs(a_vi, a_ii)
        t[2:, 2:] = y
        t[:2, 2:] = -alpha_me @ y

    v, d = modal_eval(P, alpha, beta, rule.points)
    return Basis1D(P, kind, t, rule, t @ v, t @ d, parity)


def _schur_internal(a: np.ndarray) -> np.ndarray:
    """Element matrix restricted to the internal modes with the two vertex
    modes condensed out: the effective internal operator of a solve. When a
    basis uncouples the blocks this reduces to the plain internal block.
    Only meaningful for positive-definite matrices (the effective stiffness
    K + lam*M); the plain stiffness is singular on constants."""
    return a[2:, 2:] - a[2:, :2] @ spd_solve(a[:2, :2], a[:2, 2:])


def conditioning_report(kinds, orders, lam_report: float = 1.0):
    """2-norm condition numbers of M, K and K + lam*M per basis and order.

    cond_M and cond_K are measured on the internal blocks (the quantities
    the diagonalization drives to identity at k = 0 / k = 1); cond_Khat on
    the vertex-condensed effective stiffness, which is what an iterative
    solve works against and coincides with the internal block whenever the
    basis uncouples the vertex/internal sets. Orders must be >= 2.
    ``lam_report`` is the Helmholtz weight of the reported effective
    stiffness (the basis' own lambda still shapes SDME_H itself).
    """
    rows = []
    for kind in kinds:
        for P in orders:
            if P < 2:
                raise ValueError("conditioning report needs P >= 2 (internal modes)")
            basis = build_basis(P, kind)
            m, k, _ = matrices_1d(basis)
            khat = k + lam_report * m
            rows.append(
                {
                    "basis": kind.tag,
                    "P": P,
                    "cond_M": cond2_spd(m[2:, 2:]),
                    "cond_K": cond2_spd(k[2:, 2:]),
                    "cond_Khat": cond2_spd(_schur_internal(khat)),
                }
            )
    return rows


def sparsity_report(kinds, orders, lam_report: float = 1.0, tol: float = 1e-12):
    """Count entries above tol*max|entry| for M, K, K + lam*M."""
    rows = []
    for kind in kinds:
        for P in orders:
            basis = build_basis(P, kind)
            m, k, _ = matrices_1d(basis)
            mats = {"M": m, "K": k, "Khat": k + lam_report * m}
            for name, mat in mats.items():
                nnz = int(np.sum(np.abs(mat) > tol * np.abs(mat).max()))
                rows.append({"basis": kind.tag, "P": P, "matrix": name, "nnz": nnz})
    return rows
