"""Small dense symmetric linear algebra.

Everything here targets the tiny matrices produced while building 1D
expansion bases and condensing element blocks (sizes up to a few dozen),
so robustness matters far more than speed: eigenvalues come from cyclic
Jacobi rotations and solves from an explicit Cholesky factorization.
"""

from __future__ import annotations

import numpy as np

__all__ = ["sym_eig", "spd_solve", "cond2_spd", "NotSPDError", "EigenConvergenceError"]

# Sweep cap and relative off-diagonal threshold for the Jacobi eigensolver.
_JACOBI_MAX_SWEEPS = 100
_JACOBI_TOL = 1e-14

# Relative pivot tolerance for Cholesky.
_CHOL_PIV_TOL = 1e-14


class NotSPDError(ValueError):
    """Raised when a matrix expected to be SPD has a non-positive pivot."""


class EigenConvergenceError(RuntimeError):
    """Raised when Jacobi sweeps fail to annihilate the off-diagonal part."""


def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = np.abs(a).max()
    if scale > 0 and np.abs(a - a.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def sym_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvectors in the columns of ``v`` so that ``a @ v = v @ diag(w)``.
    """
    a = _check_symmetric(a)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    if n == 1:
        return a[0].copy(), np.ones((1, 1))

    a = a.copy()
    v = np.eye(n)
    norm_a = np.linalg.norm(a)
    if norm_a == 0.0:
        return np.zeros(n), v
    thresh = _JACOBI_TOL * norm_a

    def off_norm(m):
        return np.linalg.norm(m - np.diag(np.diag(m)))

    for _ in range(_JACOBI_MAX_SWEEPS):
        if off_norm(a) <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= thresh / n:
                    continue
                # Rotation annihilating a_pq (smaller-angle root for t).
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                app, aqq = a[p, p], a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                mask = np.ones(n, dtype=bool)
                mask[[p, q]] = False
                arp = a[mask, p].copy()
                arq = a[mask, q].copy()
                a[mask, p] = c * arp - s * arq
                a[mask, q] = s * arp + c * arq
                a[p, mask] = a[mask, p]
                a[q, mask] = a[mask, q]
                vrp = v[:, p].copy()
                v[:, p] = c * vrp - s * v[:, q]
                v[:, q] = s * vrp + c * v[:, q]
    else:
        raise EigenConvergenceError(
            f"Jacobi iteration stalled: off-diagonal norm {off_norm(a):.3e} "
            f"above threshold {thresh:.3e} after {_JACOBI_MAX_SWEEPS} sweeps"
        )

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def cholesky_spd(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix, raising NotSPDError otherwise."""
    a = _check_symmetric(a)
    n = a.shape[0]
    piv_floor = _CHOL_PIV_TOL * max(np.abs(np.diag(a)).max(), 1.0) if n else 0.0
    l = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - l[j, :j] @ l[j, :j]
        if d <= piv_floor:
            raise NotSPDError(f"non-positive pivot {d:.3e} at row {j}: matrix not SPD")
        l[j, j] = np.sqrt(d)
        if j + 1 < n:
            l[j + 1 :, j] = (a[j + 1 :, j] - l[j + 1 :, :j] @ l[j, :j]) / l[j, j]
    return l


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for SPD ``a`` via Cholesky (b may be a matrix)."""
    l = cholesky_spd(a)
    b = np.asarray(b, dtype=float)
    vec = b.ndim == 1
    y = b.reshape(b.shape[0], -1).copy()
    n = a.shape[0]
    for j in range(n):  # forward substitution
        y[j] /= l[j, j]
        if j + 1 < n:
            y[j + 1 :] -= np.outer(l[j + 1 :, j], y[j])
    for j in range(n - 1, -1, -1):  # back substitution with L^T
        y[j] /= l[j, j]
        if j > 0:
            y[:j] -= np.outer(l[j, :j], y[j])
    return y[:, 0] if vec else y


def cond2_spd(a: np.ndarray) -> float:
    """2-norm condition number lambda_max / lambda_min of an SPD matrix."""
    w, _ = sym_eig(a)
    if w[0] <= 0.0:
        raise NotSPDError(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return float(w[-1] / w[0])
