"""Explicit central-difference and implicit Newmark time integration.

Both drivers share the condensation-aware linear solve: the explicit
scheme factors/condenses the constant mass operator once, the Newmark
scheme rebuilds the effective tangent every Newton iteration. Newmark
uses the standard form (gamma = 1/2, beta = 1/4 by default), which is
second order in time and unconditionally stable in the linear regime.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .femcore import FemProblem
from .solver import LinearSolver, StatsLog, condense_elements

__all__ = [
    "SolverConfig",
    "NewmarkCoeffs",
    "TimeState",
    "Trajectory",
    "cfl_dt",
    "explicit_run",
    "newmark_run",
    "NewtonDivergenceError",
]


class NewtonDivergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass
class SolverConfig:
    precond: str = "sgs"
    tol: float = 1e-12
    maxit: int = 200000
    condense: bool = True


@dataclass
class NewmarkCoeffs:
    """Update coefficients a_{n+1} = b1 (u_{n+1}-u_n) - b2 v_n - b3 a_n."""

    dt: float
    gamma: float = 0.5
    beta: float = 0.25

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("time step must be positive")
        self.b1 = 1.0 / (self.beta * self.dt**2)
        self.b2 = 1.0 / (self.beta * self.dt)
        self.b3 = (1.0 - 2.0 * self.beta) / (2.0 * self.beta)


@dataclass
class TimeState:
    t: float
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u_prev: np.ndarray | None = None


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    energy: list = field(default_factory=list)  # (t, kinetic, strain, penalty)
    state: TimeState | None = None
    stats: StatsLog = field(default_factory=StatsLog)
    newton_iters: list = field(default_factory=list)


def cfl_dt(mesh, mat, delta: float, mode: str = "AsPrinted") -> float:
    """Stability-style time-step estimate delta * h / c_L.

    ``mode`` selects the wave-speed formula: "AsPrinted" uses
    c = 3K(1-nu)/(rho(1+nu)) without a square root (the form the explicit
    step counts of the reference scenarios are based on), "PhysicalSqrt"
    takes the square root of the same expression, i.e. the actual
    dilatational wave speed.
    """
    if not 0.2 < delta < 0.9:
        raise ValueError(f"delta should lie in (0.2, 0.9), got {delta}")
    mu, lam, rho = mat.mu, mat.lambda_lame, mat.rho0
    e_mod = mu * (3.0 * lam + 2.0 * mu) / (lam + mu)
    nu = lam / (2.0 * (lam + mu))
    bulk = e_mod / (3.0 * (1.0 - 2.0 * nu))
    c = 3.0 * bulk * (1.0 - nu) / (rho * (1.0 + nu))
    if mode == "PhysicalSqrt":
        c = np.sqrt(c)
    elif mode != "AsPrinted":
        raise ValueError(f"unknown CFL mode {mode!r}")
    return delta * mesh.min_edge_length() / c


def _n_boundary(problem: FemProblem) -> int:
    boundary, _ = problem.dmap.boundary_internal_partition()
    if boundary.size and not np.array_equal(boundary, np.arange(boundary.size)):
        raise AssertionError("free boundary dofs are expected to be contiguous")
    return boundary.size


def make_solver(problem: FemProblem, element_matrices, cfg: SolverConfig) -> LinearSolver:
    """Condensed or fully assembled linear solver from element matrices."""
    if cfg.condense:
        op = condense_elements(element_matrices, problem.n_free, _n_boundary(problem))
    else:
        n = problem.n_free
        op = sp.csr_matrix((n, n))
        for k, dofs, signs in element_matrices:
            k = k * np.outer(signs, signs)
            mask = dofs >= 0
            kd = k[np.ix_(mask, mask)]
            free = dofs[mask]
            rows = np.repeat(free, len(free))
            cols = np.tile(free, len(free))
            op = op + sp.csr_matrix((kd.ravel(), (rows, cols)), shape=(n, n))
        op.sum_duplicates()
    return LinearSolver(op, cfg.precond, cfg.tol, cfg.maxit)


def explicit_run(problem: FemProblem, external_load, dt: float, n_steps: int,
                 u0=None, v0=None, cfg: SolverConfig | None = None,
                 snapshot_stride: int = 0) -> Trajectory:
    """Central-difference stepping on M a + R(u) = P(t).

    Startup: a_0 = M^-1 psi_0 and u_{-1} = u_0 - dt v_0 + dt^2/2 a_0.
    Each step solves (M/dt^2) w = psi_n for the increment over the
    history predictor u* = 2 u_n - u_{n-1}, then u_{n+1} = u* + w; with
    condensation this is the boundary Schur solve followed by interior
    recovery. ``external_load(t)`` returns the assembled load vector.
    """
    cfg = cfg or SolverConfig()
    n = problem.n_free
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    traj = Trajectory()

    mass_mats = problem.mass_matrices()
    mass_solver = make_solver(problem, mass_mats, cfg)
    mhat_mats = [(k * (1.0 / dt**2), d, s) for k, d, s in mass_mats]
    mhat_solver = make_solver(problem, mhat_mats, cfg)

    psi = external_load(0.0) - problem.internal_force(u)
    a, stats = mass_solver.solve(psi)
    traj.stats.add(-1, 0, "explicit-init", stats)
    u_prev = u - dt * v + 0.5 * dt**2 * a

    t = 0.0
    for step in range(n_steps):
        psi = external_load(t) - problem.internal_force(u)
        w, stats = mhat_solver.solve(psi)
        traj.stats.add(step, 0, "explicit", stats)
        u_next = (2.0 * u - u_prev) + w
        v = (u_next - u_prev) / (2.0 * dt)
        u_prev, u = u, u_next
        t += dt
        if snapshot_stride and (step + 1) % snapshot_stride == 0:
            traj.times.append(t)
            traj.snapshots.append(u.copy())
    traj.state = TimeState(t, u, v, a, u_prev)
    return traj


def newmark_run(problem: FemProblem, external_load, dt: float, n_steps: int,
                newton_tol: float = 1e-8, newton_maxit: int = 25,
                u0=None, v0=None, cfg: SolverConfig | None = None,
                gamma: float = 0.5, beta: float = 0.25,
                contact=None, snapshot_stride: int = 0,
                track_energy: bool = False) -> Trajectory:
    """Implicit Newmark with Newton-Raphson on the dynamic residual.

    Residual at the trial state: psi = P(t+dt) - R(u) - M a(u) (+ contact),
    effective tangent b1 M + K_T (+ contact stiffness). Newton converges
    when ||psi|| <= newton_tol * ||psi_0|| of the current step; the contact
    active set is refreshed from the trial geometry in every iteration.
    """
    cfg = cfg or SolverConfig()
    nm = NewmarkCoeffs(dt, gamma, beta)
    n = problem.n_free
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    traj = Trajectory()

    mass_mats = problem.mass_matrices()
    mass_full = problem.mass()
    mass_solver = make_solver(problem, mass_mats, cfg)

    def residual(uk, a_trial, t_next):
        psi = external_load(t_next) - problem.internal_force(uk) - mass_full @ a_trial
        fc = None
        if contact is not None:
            fc = contact.evaluate_forces(uk)
            psi = psi + fc.force
        return psi, fc

    psi0, _ = residual(u, np.zeros(n), 0.0)
    a, stats = mass_solver.solve(psi0)
    traj.stats.add(-1, 0, "newmark-init", stats)

    t = 0.0
    if track_energy:
        traj.energy.append(_energy_row(problem, contact, t, u, v))
    for step in range(n_steps):
        t_next = t + dt
        uk = u.copy()
        psi_ref = None
        fc = None
        n_newton = 0
        for k in range(newton_maxit):
            a_trial = nm.b1 * (uk - u) - nm.b2 * v - nm.b3 * a
            psi, fc = residual(uk, a_trial, t_next)
            rnorm = np.linalg.norm(psi)
            if psi_ref is None:
                psi_ref = rnorm
            if psi_ref == 0.0:
                break
            contact_ok = fc.settled if fc is not None else True
            if rnorm <= newton_tol * psi_ref and contact_ok:
                break
            if k == newton_maxit - 1:
                raise NewtonDivergenceError(
                    f"Newton did not converge in {newton_maxit} iterations at "
                    f"t={t_next:.6g} (residual {rnorm / psi_ref:.3e} relative)",
                    rnorm,
                )
            kt_mats = problem.tangent_matrices(uk)
            eff = [(kt + nm.b1 * m, d, s)
                   for (kt, d, s), (m, _, _) in zip(kt_mats, mass_mats)]
            solver = make_solver(problem, eff, cfg)
            if fc is not None and fc.stiffness is not None:
                solver = _add_contact_stiffness(solver, fc.stiffness, cfg)
            du, stats = solver.solve(psi)
            traj.stats.add(step, k, "newmark", stats)
            uk = uk + du
            n_newton += 1
        traj.newton_iters.append(n_newton)
        a_next = nm.b1 * (uk - u) - nm.b2 * v - nm.b3 * a
        v = v + dt * ((1.0 - gamma) * a + gamma * a_next)
        u, a, t = uk, a_next, t_next
        if contact is not None:
            contact.accept_step(u)
        if track_energy:
            traj.energy.append(_energy_row(problem, contact, t, u, v))
        if snapshot_stride and (step + 1) % snapshot_stride == 0:
            traj.times.append(t)
            traj.snapshots.append(u.copy())
    traj.state = TimeState(t, u, v, a)
    return traj


def _energy_row(problem, contact, t, u, v):
    mass = problem.mass()
    kinetic = 0.5 * float(v @ (mass @ v))
    strain = problem.total_strain_energy(u)
    penalty = contact.penalty_energy(u) if contact is not None else 0.0
    return (t, kinetic, strain, penalty)


def _add_contact_stiffness(solver: LinearSolver, kc, cfg: SolverConfig) -> LinearSolver:
    """Add the (boundary-supported) contact stiffness to the operator.

    Contact acts on surface modes, which are boundary dofs of the
    condensation split, so with condensation it adds directly onto the
    Schur complement; ``kc`` comes sized over all free dofs.
    """
    if solver.condensed:
        cs = solver.operator
        nb = len(cs.boundary)
        tail = kc[nb:, :]
        if tail.nnz:
            raise AssertionError("contact stiffness touches interior dofs")
        cs.schur = (cs.schur + kc[:nb, :nb]).tocsr()
        return solver
    solver.operator = (solver.operator + kc).tocsr()
    return solver
