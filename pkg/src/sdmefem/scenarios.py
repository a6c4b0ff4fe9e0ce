"""Built-in benchmark scenarios.

Each entry builds a ready-to-run RunConfig: the static and transient
fabricated-solution cube studies, a traction-loaded block, and the
bar-on-rigid-plane impact. ``--order`` and ``--basis`` switches of the
CLI override the defaults.
"""

from __future__ import annotations

from .config import (ContactConfig, DirichletConfig, InitialConfig, LoadingConfig,
                     MMSConfig, RunConfig)

__all__ = ["SCENARIOS", "make_scenario"]


def _static_cube() -> RunConfig:
    cfg = RunConfig()
    cfg.mesh.generator = "cube"
    cfg.mesh.n = 2
    cfg.material.e, cfg.material.nu, cfg.material.rho = 1000.0, 0.3, 1.0
    cfg.basis.kind, cfg.basis.p = "ST", 2
    cfg.time.scheme = "static"
    cfg.solver.preconditioner = "diagonal"
    cfg.solver.tol = 1e-12
    cfg.solver.condense = True
    cfg.newton.tol = 1e-8
    cfg.mms = MMSConfig(field="static-sine")
    cfg.dirichlet = DirichletConfig(faces=("xmin",))
    return cfg


def _explicit_cube() -> RunConfig:
    cfg = _static_cube()
    cfg.basis.p = 4
    cfg.time.scheme = "explicit"
    cfg.time.t_end = 0.25
    cfg.time.steps = 800
    cfg.time.dt = 0.25 / 800
    cfg.solver.preconditioner = "sgs"
    cfg.mms = MMSConfig(field="sine-wave")
    return cfg


def _newmark_cube_x4() -> RunConfig:
    cfg = _static_cube()
    cfg.basis.p = 4
    cfg.time.scheme = "newmark"
    cfg.time.t_end = 0.025
    cfg.time.steps = 64
    cfg.time.dt = 0.025 / 64
    cfg.solver.preconditioner = "sgs"
    cfg.newton.tol = 1e-12
    cfg.mms = MMSConfig(field="quartic-wave")
    return cfg


def _newmark_cube_sine() -> RunConfig:
    cfg = _static_cube()
    cfg.basis.p = 4
    cfg.time.scheme = "newmark"
    cfg.time.t_end = 0.25
    cfg.time.steps = 125
    cfg.time.dt = 2e-3
    cfg.solver.preconditioner = "diagonal"
    cfg.newton.tol = 1e-12
    cfg.mms = MMSConfig(field="sine-wave")
    return cfg


def _traction_block() -> RunConfig:
    """Stand-in for a component under a cyclic distributed load: a clamped
    block pulled transversally at the far end."""
    cfg = RunConfig()
    cfg.mesh.generator = "box"
    cfg.mesh.divisions = (4, 1, 1)
    cfg.mesh.lengths = (2.0, 0.5, 0.5)
    cfg.material.e, cfg.material.nu, cfg.material.rho = 500.0, 0.3, 9.5e-7
    cfg.basis.kind, cfg.basis.p = "SDME_M", 3
    cfg.time.scheme = "newmark"
    cfg.time.dt = 1.515e-5
    cfg.time.steps = 40
    cfg.solver.preconditioner = "diagonal"
    cfg.solver.tol = 1e-8
    cfg.newton.tol = 1e-4
    cfg.loading = LoadingConfig(
        tractions={"xmax": (0.0, -5.0, 0.0)}, modulation="sine", period=5.454e-3)
    cfg.dirichlet = DirichletConfig(faces=("xmin",))
    return cfg


def _bar_impact() -> RunConfig:
    """Deformable bar falling onto a rigid plane (frictionless penalty)."""
    cfg = RunConfig()
    cfg.mesh.generator = "box"
    cfg.mesh.divisions = (1, 2, 1)
    cfg.mesh.lengths = (0.05, 0.1, 0.05)
    cfg.mesh.origin = (-0.025, 0.005, -0.025)
    cfg.material.e, cfg.material.nu, cfg.material.rho = 100.0, 0.3, 1.0
    cfg.basis.kind, cfg.basis.p = "SDME_H", 3
    cfg.time.scheme = "newmark"
    cfg.time.dt = 1e-3
    cfg.time.t_end = 0.2
    cfg.time.steps = 200
    cfg.solver.preconditioner = "sgs"
    cfg.solver.tol = 1e-6
    cfg.newton.tol = 1e-6
    cfg.loading = LoadingConfig()
    cfg.initial = InitialConfig(v0=(0.0, -0.06, 0.0))
    cfg.contact = ContactConfig(
        enabled=True, point=(0.0, 0.0, 0.0), normal=(0.0, 1.0, 0.0),
        surface="ymin", eps_n=1e4, deps_n=1e3, gap_tol=1e-3, stress_tol=1e-2)
    return cfg


SCENARIOS = {
    "static-cube-mms": _static_cube,
    "explicit-cube-mms": _explicit_cube,
    "newmark-cube-mms-x4": _newmark_cube_x4,
    "newmark-cube-mms-sin": _newmark_cube_sine,
    "traction-block": _traction_block,
    "bar-impact": _bar_impact,
}


def make_scenario(name: str, order: int | None = None, basis: str | None = None) -> RunConfig:
    try:
        cfg = SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}") from None
    if order is not None:
        cfg.basis.p = order
    if basis is not None:
        cfg.basis.kind = basis
    return cfg
