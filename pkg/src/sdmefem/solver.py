"""Preconditioned conjugate gradients and boundary/internal condensation.

The Gauss-Seidel preconditioner is the symmetric variant (forward then
backward sweep) so the preconditioned operator stays symmetric; the
convergence test uses the plain relative residual ||b - Ax|| / ||b||.
Condensation eliminates element-interior DOFs: the interior block is
block-diagonal by element, so each block gets its own dense Cholesky and
the boundary Schur complement is assembled explicitly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "SolveStats",
    "StatsLog",
    "PCGError",
    "pcg",
    "CondensedSystem",
    "condense",
    "condense_elements",
    "recover_internal",
]


class PCGError(RuntimeError):
    """PCG failure; carries the stats gathered up to the failure."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


@dataclass
class SolveStats:
    iterations: int
    residual: float  # final relative residual
    seconds: float
    preconditioner: str
    converged: bool = True


@dataclass
class StatsLog:
    """Per-linear-solve records accumulated by the time-stepping drivers."""

    rows: list = field(default_factory=list)

    def add(self, step: int, newton_iter: int, solver: str, stats: SolveStats):
        self.rows.append(
            {
                "step": step,
                "newton_iter": newton_iter,
                "solver": solver,
                "preconditioner": stats.preconditioner,
                "iterations": stats.iterations,
                "residual": stats.residual,
                "seconds": stats.seconds,
            }
        )

    def mean_iterations(self) -> float:
        if not self.rows:
            return 0.0
        return float(np.mean([r["iterations"] for r in self.rows]))

    def total_seconds(self) -> float:
        return float(sum(r["seconds"] for r in self.rows))


@njit(cache=True)
def _gs_forward(indptr, indices, data, diag, z, r):
    n = len(diag)
    for i in range(n):
        s = r[i]
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j != i:
                s -= data[jj] * z[j]
        z[i] = s / diag[i]


@njit(cache=True)
def _gs_backward(indptr, indices, data, diag, z, r):
    n = len(diag)
    for i in range(n - 1, -1, -1):
        s = r[i]
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j != i:
                s -= data[jj] * z[j]
        z[i] = s / diag[i]


def _make_preconditioner(a, precond: str):
    if precond in (None, "none"):
        return lambda r: r, "none"
    if precond == "diagonal":
        d = a.diagonal() if sp.issparse(a) else np.diag(a)
        if np.any(d <= 0.0):
            raise ValueError("diagonal preconditioner needs positive diagonal entries")
        inv = 1.0 / d
        return lambda r: inv * r, "diagonal"
    if precond in ("sgs", "gauss-seidel"):
        a = sp.csr_matrix(a)
        a.sort_indices()
        d = a.diagonal()
        if np.any(d <= 0.0):
            raise ValueError("Gauss-Seidel preconditioner needs positive diagonal entries")
        indptr, indices, data = a.indptr, a.indices, a.data

        def apply(r):
            z = np.zeros_like(r)
            _gs_forward(indptr, indices, data, d, z, r)
            _gs_backward(indptr, indices, data, d, z, r)
            return z

        return apply, "sgs"
    raise ValueError(f"unknown preconditioner {precond!r}")


def pcg(a, b, precond="diagonal", tol=1e-8, maxit=10000, x0=None):
    """Conjugate gradients for SPD systems; returns (x, SolveStats).

    Raises PCGError when the iteration cap is exceeded or an indefinite
    direction (p^T A p <= 0) shows up.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tolerance must lie in (0, 1), got {tol}")
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    apply_m, tag = _make_preconditioner(a, precond)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b), SolveStats(0, 0.0, time.perf_counter() - t0, tag)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - a @ x
    z = apply_m(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxit + 1):
        ap = a @ p
        pap = p @ ap
        if pap <= 0.0:
            raise PCGError(
                f"indefinite operator detected at iteration {it} (p^T A p = {pap:.3e})",
                SolveStats(it, np.linalg.norm(r) / norm_b, time.perf_counter() - t0, tag, False),
            )
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rel = np.linalg.norm(r) / norm_b
        if rel <= tol:
            return x, SolveStats(it, rel, time.perf_counter() - t0, tag)
        z = apply_m(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    rel = np.linalg.norm(b - a @ x) / norm_b
    raise PCGError(
        f"PCG did not converge in {maxit} iterations (relative residual {rel:.3e})",
        SolveStats(maxit, rel, time.perf_counter() - t0, tag, False),
    )


@dataclass
class _Group:
    ids: np.ndarray  # interior dof ids of this block (global numbering)
    cols: np.ndarray  # coupled boundary dofs, as positions in the boundary list
    chol: tuple  # cho_factor of the interior block
    a_ib: np.ndarray  # dense interior x boundary coupling block


@dataclass
class CondensedSystem:
    """Boundary Schur complement with per-block interior factorizations."""

    schur: sp.csr_matrix
    boundary: np.ndarray
    groups: list
    n: int

    def reduce_rhs(self, b: np.ndarray) -> np.ndarray:
        """b_b - A_bi A_ii^-1 b_i restricted to the boundary dofs."""
        out = b[self.boundary].astype(float).copy()
        for g in self.groups:
            out[g.cols] -= g.a_ib.T @ cho_solve(g.chol, b[g.ids])
        return out

    def recover(self, b: np.ndarray, u_b: np.ndarray) -> np.ndarray:
        """Full solution vector from the boundary solution."""
        u = np.zeros(self.n)
        u[self.boundary] = u_b
        for g in self.groups:
            u[g.ids] = cho_solve(g.chol, b[g.ids] - g.a_ib @ u_b[g.cols])
        return u


def condense(a, boundary: np.ndarray, groups: list) -> CondensedSystem:
    """Schur-condense an assembled SPD matrix onto its boundary dofs.

    ``groups`` lists the interior dofs in independent blocks (one per
    element in the FEM case, or a single block for a generic partition).
    """
    a = sp.csr_matrix(a)
    n = a.shape[0]
    boundary = np.asarray(boundary, dtype=int)
    counts = np.zeros(n, dtype=int)
    counts[boundary] += 1
    for g in groups:
        counts[g] += 1
    if np.any(counts != 1):
        raise ValueError("boundary + interior groups must partition the dofs")
    group_of = np.full(n, -1)
    for gi, g in enumerate(groups):
        group_of[np.asarray(g, dtype=int)] = gi
    schur = sp.csr_matrix(a[boundary, :][:, boundary])
    recs = []
    corr = []
    for gi, ids in enumerate(groups):
        ids = np.asarray(ids, dtype=int)
        if ids.size == 0:
            continue
        a_rows = sp.csr_matrix(a[ids, :])
        touched = np.unique(a_rows.indices)
        foreign = touched[(group_of[touched] >= 0) & (group_of[touched] != gi)]
        if foreign.size:
            raise ValueError(
                "interior groups must not couple to each other "
                f"(group {gi} touches dofs of another group)")
        a_ii = a_rows[:, ids].toarray()
        a_ib_full = sp.csr_matrix(a_rows[:, boundary])
        cols = np.unique(a_ib_full.indices)  # csr indices = column ids
        a_ib = a_ib_full[:, cols].toarray()
        try:
            chol = cho_factor(a_ii)
        except np.linalg.LinAlgError as exc:
            raise ValueError("interior block is not SPD") from exc
        recs.append(_Group(ids, cols, chol, a_ib))
        w = cho_solve(chol, a_ib)
        corr.append((cols, a_ib.T @ w))
    if corr:
        nb = len(boundary)
        rows = np.concatenate([np.repeat(c, len(c)) for c, _ in corr])
        cols = np.concatenate([np.tile(c, len(c)) for c, _ in corr])
        vals = np.concatenate([m.ravel() for _, m in corr])
        schur = (schur - sp.csr_matrix((vals, (rows, cols)), shape=(nb, nb))).tocsr()
    return CondensedSystem(schur, boundary, recs, n)


def condense_elements(element_matrices, n_free: int, n_boundary: int) -> CondensedSystem:
    """Condense directly from dense element matrices.

    Avoids assembling the full operator: interior dofs never couple
    across elements, so each element contributes its own interior block
    and Schur correction. ``element_matrices`` yields (k, dofs, signs)
    with dofs in free numbering (-1 for constrained) where boundary dofs
    are those below ``n_boundary``.
    """
    nb = n_boundary
    schur_parts = []
    recs = []
    for k, dofs, signs in element_matrices:
        k = k * np.outer(signs, signs)
        mask = dofs >= 0
        kd = k[np.ix_(mask, mask)]
        free = dofs[mask]
        lb = np.where(free < nb)[0]
        li = np.where(free >= nb)[0]
        kbb = kd[np.ix_(lb, lb)]
        bid = free[lb]
        if li.size:
            kii = kd[np.ix_(li, li)]
            kib = kd[np.ix_(li, lb)]
            try:
                chol = cho_factor(kii)
            except np.linalg.LinAlgError as exc:
                raise ValueError("element interior block is not SPD") from exc
            recs.append(_Group(free[li], bid, chol, kib))
            kbb = kbb - kib.T @ cho_solve(chol, kib)
        rows = np.repeat(bid, len(bid))
        cols = np.tile(bid, len(bid))
        schur_parts.append(sp.csr_matrix((kbb.ravel(), (rows, cols)), shape=(nb, nb)))
    schur = sum(schur_parts, sp.csr_matrix((nb, nb)))
    schur.sum_duplicates()
    return CondensedSystem(schur.tocsr(), np.arange(nb), recs, n_free)


def recover_internal(condensed: CondensedSystem, b: np.ndarray, u_b: np.ndarray) -> np.ndarray:
    """Interior coefficients A_ii^-1 (b_i - A_bi^T u_b) merged into the
    full vector (boundary part copied from u_b)."""
    return condensed.recover(b, u_b)


@dataclass
class LinearSolver:
    """One configured linear-solve path: optionally condensed, then PCG."""

    operator: object  # csr matrix or CondensedSystem
    precond: str = "diagonal"
    tol: float = 1e-8
    maxit: int = 50000

    @property
    def condensed(self) -> bool:
        return isinstance(self.operator, CondensedSystem)

    def solve(self, rhs: np.ndarray) -> tuple[np.ndarray, SolveStats]:
        if self.condensed:
            cs = self.operator
            b_sc = cs.reduce_rhs(rhs)
            u_b, stats = pcg(cs.schur, b_sc, self.precond, self.tol, self.maxit)
            stats.preconditioner += "+schur"  # flag the condensed mode in reports
            return cs.recover(rhs, u_b), stats
        return pcg(self.operator, rhs, self.precond, self.tol, self.maxit)
