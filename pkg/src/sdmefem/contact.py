"""Frictionless penalty contact against rigid plane obstacles.

Contact is enforced pointwise at the surface quadrature points: wherever
the current position penetrates the obstacle (negative gap), a pressure
t_N = eps_N * (-g) acts along the obstacle normal. The active set is
recomputed from the trial geometry in every Newton iteration; a step is
considered settled when the pressure field stopped changing between
iterations (relative stress tolerance) and the penalty stiffness is
stepped up whenever the accepted penetration exceeds the gap tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .femcore import FemProblem, build_face_tables
from .quadrature import gauss_rule

__all__ = ["RigidObstacle", "ContactParams", "PenaltyContact", "gap"]


@dataclass(frozen=True)
class RigidObstacle:
    """Plane through ``point`` with unit ``outward_normal`` pointing into
    the admissible half-space."""

    point: np.ndarray
    outward_normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        n = np.asarray(self.outward_normal, dtype=float)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-12:
            n = n / norm
        object.__setattr__(self, "outward_normal", n)


def gap(obstacle: RigidObstacle, x: np.ndarray) -> np.ndarray:
    """Signed normal distance of point(s) x; negative means penetration."""
    x = np.asarray(x, dtype=float)
    return (x - obstacle.point) @ obstacle.outward_normal


@dataclass
class ContactParams:
    eps_n: float
    deps_n: float = 0.0
    gap_tol: float = 1e-3
    stress_tol: float = 1e-2

    def __post_init__(self):
        if self.eps_n <= 0.0:
            raise ValueError("penalty stiffness must be positive")
        if self.gap_tol <= 0.0 or self.stress_tol <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class ContactForces:
    force: np.ndarray
    stiffness: sp.csr_matrix | None
    pressures: np.ndarray  # per quadrature point, all faces concatenated
    gaps: np.ndarray
    active: np.ndarray
    settled: bool


class PenaltyContact:
    """Penalty contact of one tagged mesh surface against a rigid plane."""

    def __init__(self, problem: FemProblem, obstacle: RigidObstacle,
                 params: ContactParams, surface_tag: str, quad_order: int | None = None):
        self.problem = problem
        self.obstacle = obstacle
        self.params = params
        self.surface_tag = surface_tag
        order = quad_order if quad_order is not None else problem.element.P + 1
        self.faces = build_face_tables(problem.mesh, problem.element, surface_tag,
                                       gauss_rule(order))
        self._last_pressures = None
        self.history = []  # (eps_n, penetration, min pressure, active count) per step

    def _gaps(self, u_free: np.ndarray):
        dim = self.problem.dmap.dim
        point = self.obstacle.point[:dim]
        normal = self.obstacle.outward_normal[:dim]
        gaps = []
        for face in self.faces:
            u_e = self.problem.gather(face.elem, u_free)
            x_cur = face.pts + face.vals @ u_e
            gaps.append((x_cur - point) @ normal)
        return gaps

    def update_active_set(self, u_free: np.ndarray):
        """Active flags per face quadrature point from the trial geometry."""
        gaps = self._gaps(u_free)
        return [g < 0.0 for g in gaps], gaps

    def evaluate_forces(self, u_free: np.ndarray) -> ContactForces:
        """Contact nodal forces, tangent stiffness and settlement flag."""
        active, gaps = self.update_active_set(u_free)
        n = self.problem.n_free
        dim = self.problem.dmap.dim
        normal = self.obstacle.outward_normal[:dim]
        force = np.zeros(n)
        rows, cols, vals = [], [], []
        pressures = []
        eps = self.params.eps_n
        for face, act, g in zip(self.faces, active, gaps):
            t_n = np.where(act, -eps * g, 0.0)
            pressures.append(t_n)
            if not np.any(act):
                continue
            # restrict to the functions with support on this face (the
            # element-interior bubbles vanish there)
            sup = np.where(np.abs(face.vals).max(axis=0) > 1e-13)[0]
            nvals = face.vals[:, sup]
            dofs, signs = self.problem.dmap.elem_vector_dofs(face.elem)
            sel = (sup[:, None] * dim + np.arange(dim)).ravel()
            dofs, signs = dofs[sel], signs[sel]
            r = np.einsum("q,qf,c->fc", face.warea * t_n, nvals, normal)
            rloc = r.reshape(-1) * signs
            mask = dofs >= 0
            np.add.at(force, dofs[mask], rloc[mask])
            # stiffness: eps * N_i N_j (n (x) n) over active points
            nn = np.outer(normal, normal)
            w_act = face.warea * act
            kf = np.einsum("q,qf,qg->fg", eps * w_act, nvals, nvals)
            kc = np.einsum("fg,ce->fcge", kf, nn).reshape(len(rloc), len(rloc))
            kc = kc * np.outer(signs, signs)
            kd = kc[np.ix_(mask, mask)]
            free = dofs[mask]
            rows.append(np.repeat(free, len(free)))
            cols.append(np.tile(free, len(free)))
            vals.append(kd.ravel())
        pressures = np.concatenate(pressures) if pressures else np.zeros(0)
        gaps_all = np.concatenate(gaps) if gaps else np.zeros(0)
        active_all = np.concatenate(active) if active else np.zeros(0, dtype=bool)
        stiffness = None
        if rows:
            stiffness = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n, n),
            )
        settled = self._pressure_settled(pressures)
        self._last_pressures = pressures
        return ContactForces(force, stiffness, pressures, gaps_all, active_all, settled)

    def _pressure_settled(self, pressures: np.ndarray) -> bool:
        prev = self._last_pressures
        if prev is None or prev.shape != pressures.shape:
            return not pressures.any()
        scale = max(np.abs(pressures).max(), np.abs(prev).max())
        if scale == 0.0:
            return True
        return float(np.abs(pressures - prev).max()) / scale <= self.params.stress_tol

    def accept_step(self, u_free: np.ndarray):
        """Per-step acceptance: raise the penalty if penetration exceeds
        the gap tolerance, and reset the iteration pressure history."""
        active, gaps = self.update_active_set(u_free)
        pen = max((float(-g.min()) for g in gaps if g.size), default=0.0)
        pen = max(pen, 0.0)
        t_n = np.concatenate(
            [np.where(a, -self.params.eps_n * g, 0.0) for a, g in zip(active, gaps)]
        ) if gaps else np.zeros(0)
        act_all = np.concatenate(active) if active else np.zeros(0, dtype=bool)
        t_min = float(t_n[act_all].min()) if act_all.any() else 0.0
        self.history.append((self.params.eps_n, pen, t_min, int(act_all.sum())))
        if pen > self.params.gap_tol and self.params.deps_n > 0.0:
            self.params.eps_n += self.params.deps_n
        self._last_pressures = None

    def penalty_energy(self, u_free: np.ndarray) -> float:
        """Stored penalty energy integral eps/2 g^2 over the active set."""
        total = 0.0
        for face, g in zip(self.faces, self._gaps(u_free)):
            pen = np.minimum(g, 0.0)
            total += 0.5 * self.params.eps_n * float(face.warea @ pen**2)
        return total

    def pressure_profile(self, u_free: np.ndarray):
        """(arc-length coordinate, pressure) rows along the contact surface.

        The coordinate is the distance of each quadrature point from the
        surface's minimum corner measured within the obstacle plane; rows
        are sorted by it, giving a plottable stress profile.
        """
        pts, t_ns = [], []
        eps = self.params.eps_n
        for face, g in zip(self.faces, self._gaps(u_free)):
            t_ns.append(np.where(g < 0.0, -eps * g, 0.0))
            pts.append(face.pts)
        pts = np.vstack(pts)
        t_ns = np.concatenate(t_ns)
        nrm = self.obstacle.outward_normal[: pts.shape[1]]
        inplane = pts - np.outer(pts @ nrm, nrm)
        s = np.linalg.norm(inplane - inplane.min(axis=0), axis=1)
        order = np.argsort(s, kind="stable")
        return np.column_stack([s[order], t_ns[order]])
