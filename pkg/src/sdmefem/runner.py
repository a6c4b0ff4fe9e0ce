"""Drivers turning a RunConfig into an executed analysis.

The runner owns the glue: mesh and basis construction, load functions
(fabricated-solution or declared tractions), the static Newton loop, the
dispatch to the explicit/Newmark integrators, and the report files.
"""

from __future__ import annotations

import copy
import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .basis1d import BasisKind, build_basis
from .config import RunConfig
from .contact import ContactParams, PenaltyContact, RigidObstacle
from .dynamics import (NewtonDivergenceError, SolverConfig, Trajectory, cfl_dt,
                       explicit_run, make_solver, newmark_run)
from .femcore import FemProblem, build_face_tables
from .fields import get_field
from .material import NeoHookean
from .meshdof import build_dofmap, gen_box_mesh, gen_cube_mesh, gen_rect_mesh, read_mesh
from .solver import StatsLog
from .tensorelem import TensorElement
from .vtkio import write_vtk

__all__ = ["RunResult", "build_problem", "run_config", "static_solve",
           "benchmark_compare", "write_csv"]

_KIND_MAP = {"ST": "ModalJacobi", "Lagrange": "LagrangeGLL"}


@dataclass
class RunResult:
    """Everything a finished run reports (the machine-readable bundle)."""

    config: RunConfig
    n_free: int
    u: np.ndarray
    errors: np.ndarray | None  # componentwise L2 errors for MMS runs
    stats: StatsLog
    newton_iters: list = field(default_factory=list)
    trajectory: Trajectory | None = None
    contact: PenaltyContact | None = None
    files: list = field(default_factory=list)
    t_end: float = 0.0
    problem: FemProblem | None = None

    @property
    def mean_iterations(self) -> float:
        rows = [r for r in self.stats.rows if not r["solver"].endswith("init")]
        if not rows:
            return 0.0
        return float(np.mean([r["iterations"] for r in rows]))

    @property
    def mean_solve_seconds(self) -> float:
        rows = [r for r in self.stats.rows if not r["solver"].endswith("init")]
        if not rows:
            return 0.0
        return float(np.mean([r["seconds"] for r in rows]))


def basis_kind_from_config(cfg: RunConfig) -> BasisKind:
    b = cfg.basis
    return BasisKind(_KIND_MAP.get(b.kind, b.kind), jacobi_alpha=b.alpha,
                     jacobi_beta=b.beta, k=b.k, lam=b.lam)


def build_mesh(cfg: RunConfig):
    m = cfg.mesh
    if m.generator == "cube":
        return gen_cube_mesh(m.n, m.lengths)
    if m.generator == "box":
        return gen_box_mesh(m.divisions[:3], m.lengths[:3], m.origin[:3])
    if m.generator == "rect":
        return gen_rect_mesh(m.divisions[:2], m.lengths[:2], m.origin[:2])
    return read_mesh(m.path)


def build_problem(cfg: RunConfig) -> FemProblem:
    mesh = build_mesh(cfg)
    kind = basis_kind_from_config(cfg)
    basis = build_basis(cfg.basis.p, kind)
    element = TensorElement.create(mesh.dim, basis)
    comps = tuple(c for c in cfg.dirichlet.components if c < mesh.dim)
    dirichlet = [(tag, comps) for tag in cfg.dirichlet.faces]
    dmap = build_dofmap(mesh, element, dirichlet)
    mat = NeoHookean.from_engineering(cfg.material.e, cfg.material.nu, cfg.material.rho)
    return FemProblem(mesh, element, dmap, mat)


def _free_boundary_tags(cfg: RunConfig, mesh) -> list[str]:
    """Boundary tags that still need Neumann data under the MMS setup."""
    dim = mesh.dim
    fully_fixed = set()
    if set(c for c in cfg.dirichlet.components if c < dim) == set(range(dim)):
        fully_fixed = set(cfg.dirichlet.faces)
    return [t for t in sorted(mesh.boundary_sides) if t not in fully_fixed]


def make_load_function(cfg: RunConfig, problem: FemProblem):
    """(load(t), field or None): assembled external load at a given time."""
    if cfg.mms is not None:
        fld = get_field(cfg.mms.field)
        faces = []
        for tag in _free_boundary_tags(cfg, problem.mesh):
            faces.extend(build_face_tables(problem.mesh, problem.element, tag, problem.rule))
        cache = {}

        def load(t):
            if t not in cache:
                cache.clear()
                cache[t] = problem.mms_load(fld, t, traction_faces=faces)
            return cache[t]

        return load, fld

    ld = cfg.loading
    base = np.zeros(problem.n_free)
    for tag, tvec in ld.tractions.items():
        faces = build_face_tables(problem.mesh, problem.element, tag, problem.rule)
        tv = np.asarray(tvec[: problem.mesh.dim])
        base += problem.traction_vector(faces, lambda face: np.tile(tv, (len(face.pts), 1)))
    if any(ld.body_force[: problem.mesh.dim]):
        bf = np.asarray(ld.body_force[: problem.mesh.dim])
        base += problem.body_force_vector(lambda pts: np.tile(bf, (len(pts), 1)))

    if ld.modulation == "sine":
        return lambda t: base * np.sin(2.0 * np.pi * t / ld.period), None
    return lambda t: base, None


def static_solve(problem: FemProblem, rhs: np.ndarray, newton_tol: float,
                 newton_maxit: int, cfg: SolverConfig, stats: StatsLog):
    """Newton iteration on the static balance R(u) = rhs."""
    u = np.zeros(problem.n_free)
    ref = np.linalg.norm(rhs)
    if ref == 0.0:
        return u, 0
    n_iter = 0
    for k in range(newton_maxit):
        psi = rhs - problem.internal_force(u)
        if np.linalg.norm(psi) <= newton_tol * ref:
            return u, n_iter
        solver = make_solver(problem, problem.tangent_matrices(u), cfg)
        du, st = solver.solve(psi)
        stats.add(0, k, "static", st)
        u = u + du
        n_iter += 1
    psi = rhs - problem.internal_force(u)
    rel = np.linalg.norm(psi) / ref
    if rel <= newton_tol:
        return u, n_iter
    raise NewtonDivergenceError(
        f"static Newton did not converge in {newton_maxit} iterations "
        f"(relative residual {rel:.3e})", float(np.linalg.norm(psi)))


def _resolve_dt_steps(cfg: RunConfig, problem: FemProblem):
    t = cfg.time
    dt = t.dt
    if dt <= 0.0:
        dt = cfl_dt(problem.mesh, problem.mat, t.cfl_delta, t.cfl_mode)
    steps = t.steps if t.steps > 0 else int(round(t.t_end / dt))
    return dt, steps


def _initial_conditions(cfg: RunConfig, problem: FemProblem, fld):
    dim = problem.mesh.dim
    if fld is not None:
        u0 = problem.l2_project(lambda pts: fld.u(pts, 0.0)[:, :dim])
        v0 = problem.l2_project(lambda pts: fld.v(pts, 0.0)[:, :dim])
        return u0, v0
    ic = cfg.initial
    u0 = v0 = None
    if any(ic.u0[:dim]):
        c = np.asarray(ic.u0[:dim])
        u0 = problem.l2_project(lambda pts: np.tile(c, (len(pts), 1)))
    if any(ic.v0[:dim]):
        c = np.asarray(ic.v0[:dim])
        v0 = problem.l2_project(lambda pts: np.tile(c, (len(pts), 1)))
    return u0, v0


def run_config(cfg: RunConfig, outdir=None, write_outputs: bool = True) -> RunResult:
    """Execute one configured analysis and (optionally) write its reports."""
    problem = build_problem(cfg)
    load, fld = make_load_function(cfg, problem)
    scfg = SolverConfig(precond=cfg.solver.preconditioner, tol=cfg.solver.tol,
                        maxit=cfg.solver.maxit, condense=cfg.solver.condense)
    contact = None
    if cfg.contact.enabled:
        params = ContactParams(cfg.contact.eps_n, cfg.contact.deps_n,
                               cfg.contact.gap_tol, cfg.contact.stress_tol)
        obstacle = RigidObstacle(np.asarray(cfg.contact.point),
                                 np.asarray(cfg.contact.normal))
        contact = PenaltyContact(problem, obstacle, params, cfg.contact.surface)

    scheme = cfg.time.scheme
    stats = StatsLog()
    traj = None
    newton_iters = []
    t_end = 0.0
    if scheme == "static":
        u, n_newton = static_solve(problem, load(0.0), cfg.newton.tol,
                                   cfg.newton.maxit, scfg, stats)
        newton_iters = [n_newton]
    else:
        dt, steps = _resolve_dt_steps(cfg, problem)
        u0, v0 = _initial_conditions(cfg, problem, fld)
        if scheme == "explicit":
            traj = explicit_run(problem, load, dt, steps, u0=u0, v0=v0, cfg=scfg,
                                snapshot_stride=cfg.time.snapshot_stride)
        else:
            traj = newmark_run(problem, load, dt, steps, newton_tol=cfg.newton.tol,
                               newton_maxit=cfg.newton.maxit, u0=u0, v0=v0, cfg=scfg,
                               contact=contact, snapshot_stride=cfg.time.snapshot_stride,
                               track_energy=contact is not None)
        stats = traj.stats
        newton_iters = traj.newton_iters
        u = traj.state.u
        t_end = traj.state.t

    errors = problem.l2_error(u, fld, t_end) if fld is not None else None
    result = RunResult(cfg, problem.n_free, u, errors, stats, newton_iters,
                       traj, contact, t_end=t_end, problem=problem)
    if write_outputs:
        _write_outputs(result, problem, outdir)
    return result


def _write_outputs(result: RunResult, problem: FemProblem, outdir=None):
    cfg = result.config
    out = outdir or cfg.output.outdir
    os.makedirs(out, exist_ok=True)
    stats_path = os.path.join(out, cfg.output.stats_csv)
    write_csv(stats_path, result.stats.rows,
              ["step", "newton_iter", "solver", "preconditioner",
               "iterations", "residual", "seconds"])
    result.files.append(stats_path)
    if result.errors is not None:
        err_path = os.path.join(out, "errors.csv")
        errs = result.errors
        row = {"P": cfg.basis.p, "dofs": result.n_free,
               "err_x": errs[0], "err_y": errs[1] if len(errs) > 1 else 0.0,
               "err_z": errs[2] if len(errs) > 2 else 0.0}
        write_csv(err_path, [row], ["P", "dofs", "err_x", "err_y", "err_z"])
        result.files.append(err_path)
    if cfg.output.vtk:
        vtk_path = os.path.join(out, cfg.output.vtk)
        write_vtk(vtk_path, problem.mesh, problem.element, problem.dmap,
                  result.u, cfg.output.vtk_resolution)
        result.files.append(vtk_path)
        if result.trajectory is not None and result.trajectory.snapshots:
            stem, ext = os.path.splitext(vtk_path)
            for i, snap in enumerate(result.trajectory.snapshots):
                path = f"{stem}_{i + 1:04d}{ext}"
                write_vtk(path, problem.mesh, problem.element, problem.dmap,
                          snap, cfg.output.vtk_resolution)
                result.files.append(path)
    if result.contact is not None:
        prof_path = os.path.join(out, "contact_pressure.csv")
        prof = result.contact.pressure_profile(result.u)
        rows = [{"s": s, "t_n": t} for s, t in prof]
        write_csv(prof_path, rows, ["s", "t_n"])
        result.files.append(prof_path)
        if result.trajectory is not None and result.trajectory.energy:
            en_path = os.path.join(out, "energy.csv")
            rows = [{"t": t, "kinetic": k, "strain": s, "penalty": p,
                     "total": k + s + p}
                    for (t, k, s, p) in result.trajectory.energy]
            write_csv(en_path, rows, ["t", "kinetic", "strain", "penalty", "total"])
            result.files.append(en_path)


def benchmark_compare(template: RunConfig, bases: list[str], orders: list[int],
                      outdir=None) -> list[dict]:
    """Run a basis x order sweep of one template config.

    Rows carry the mean linear-solver iterations and seconds per solve and
    the speedup of each basis against the first one in ``bases`` (the
    reference, conventionally the standard modal basis). A failed run
    marks its row and the sweep continues.
    """
    rows = []
    ref_seconds = {}
    for kind in bases:
        for p in orders:
            cfg = copy.deepcopy(template)
            cfg.basis.kind = kind
            cfg.basis.p = p
            row = {"basis": kind, "P": p, "dofs": 0, "mean_iterations": 0.0,
                   "mean_seconds": 0.0, "speedup_vs_ref": 0.0, "failed": False}
            try:
                res = run_config(cfg, outdir=outdir, write_outputs=False)
                row["dofs"] = res.n_free
                row["mean_iterations"] = res.mean_iterations
                row["mean_seconds"] = res.mean_solve_seconds
                if kind == bases[0]:
                    ref_seconds[p] = res.mean_solve_seconds
                ref = ref_seconds.get(p, 0.0)
                row["speedup_vs_ref"] = ref / row["mean_seconds"] if row["mean_seconds"] > 0 else 0.0
            except Exception:
                row["failed"] = True
            rows.append(row)
    return rows


def write_csv(path, rows, columns):
    """CSV with comma delimiter and 6-significant-digit scientific floats."""

    def fmt(v):
        if isinstance(v, (bool, np.bool_)):
            return str(v).lower()
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.5e}"
        return str(v)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row[c]) for c in columns])
