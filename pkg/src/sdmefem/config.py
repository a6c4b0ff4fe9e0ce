"""Declarative run configuration: sectioned key-value files.

The format is INI-like ASCII: ``[section]`` headers, ``key = value``
lines, ``#`` comments. Unknown sections or keys are rejected with the
offending line number, as are missing required keys and out-of-range
values. A config describes exactly one run; either an ``[mms]`` section
(fabricated solution drives loads and error norms) or a ``[loading]``
section (explicit tractions/body forces, possibly empty for free flight)
must be present, never both.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

from .fields import FIELD_REGISTRY

__all__ = ["RunConfig", "ConfigError", "parse_config", "parse_config_file", "serialize_config"]

BASIS_NAMES = ("ST", "SDME_M", "SDME_K", "SDME_H", "Lagrange")


class ConfigError(ValueError):
    pass


@dataclass
class MeshConfig:
    generator: str = "cube"  # cube | box | file
    n: int = 2
    divisions: tuple = (1, 1, 1)
    lengths: tuple = (1.0, 1.0, 1.0)
    origin: tuple = (0.0, 0.0, 0.0)
    path: str = ""


@dataclass
class MaterialConfig:
    e: float = 1000.0
    nu: float = 0.3
    rho: float = 1.0


@dataclass
class BasisConfig:
    kind: str = "ST"
    p: int = 2
    k: float = 0.5
    lam: float = 100.0
    alpha: float = 1.0
    beta: float = 1.0


@dataclass
class TimeConfig:
    scheme: str = "static"  # static | explicit | newmark
    dt: float = 0.0
    steps: int = 0
    t_end: float = 0.0
    cfl_delta: float = 0.0
    cfl_mode: str = "AsPrinted"
    snapshot_stride: int = 0


@dataclass
class SolverSection:
    preconditioner: str = "diagonal"
    tol: float = 1e-12
    maxit: int = 200000
    condense: bool = True


@dataclass
class NewtonConfig:
    tol: float = 1e-8
    maxit: int = 25


@dataclass
class MMSConfig:
    field: str = ""


@dataclass
class LoadingConfig:
    tractions: dict = dfield(default_factory=dict)  # tag -> (tx, ty, tz)
    body_force: tuple = (0.0, 0.0, 0.0)
    modulation: str = "constant"  # constant | sine
    period: float = 1.0


@dataclass
class DirichletConfig:
    faces: tuple = ()
    components: tuple = (0, 1, 2)


@dataclass
class InitialConfig:
    u0: tuple = (0.0, 0.0, 0.0)
    v0: tuple = (0.0, 0.0, 0.0)


@dataclass
class ContactConfig:
    enabled: bool = False
    point: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 1.0, 0.0)
    surface: str = ""
    eps_n: float = 1e4
    deps_n: float = 0.0
    gap_tol: float = 1e-3
    stress_tol: float = 1e-2


@dataclass
class OutputConfig:
    outdir: str = "out"
    vtk: str = ""
    vtk_resolution: int = 2
    stats_csv: str = "solver_stats.csv"


@dataclass
class RunConfig:
    mesh: MeshConfig = dfield(default_factory=MeshConfig)
    material: MaterialConfig = dfield(default_factory=MaterialConfig)
    basis: BasisConfig = dfield(default_factory=BasisConfig)
    time: TimeConfig = dfield(default_factory=TimeConfig)
    solver: SolverSection = dfield(default_factory=SolverSection)
    newton: NewtonConfig = dfield(default_factory=NewtonConfig)
    mms: MMSConfig | None = None
    loading: LoadingConfig | None = None
    dirichlet: DirichletConfig = dfield(default_factory=DirichletConfig)
    initial: InitialConfig = dfield(default_factory=InitialConfig)
    contact: ContactConfig = dfield(default_factory=ContactConfig)
    output: OutputConfig = dfield(default_factory=OutputConfig)


def _floats(text, n=None):
    vals = tuple(float(t) for t in text.split())
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} numbers, got {len(vals)}")
    return vals


def _ints(text, n=None):
    vals = tuple(int(t) for t in text.split())
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} integers, got {len(vals)}")
    return vals


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_COMP = {"x": 0, "y": 1, "z": 2}


def parse_config(text: str, name: str = "<config>") -> RunConfig:
    """Parse and validate a config; raises ConfigError with line info."""
    cfg = RunConfig()
    seen = set()
    section = None

    def fail(ln, msg):
        raise ConfigError(f"{name}:{ln}: {msg}")

    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("mesh", "material", "basis", "time", "solver", "newton",
                               "mms", "loading", "dirichlet", "initial", "contact", "output"):
                fail(ln, f"unknown section [{section}]")
            seen.add(section)
            if section == "mms" and cfg.mms is None:
                cfg.mms = MMSConfig()
            if section == "loading" and cfg.loading is None:
                cfg.loading = LoadingConfig()
            if section == "contact":
                cfg.contact.enabled = True
            continue
        if section is None:
            fail(ln, "content before any [section] header")
        if "=" not in line:
            fail(ln, "expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        try:
            _apply_key(cfg, section, key, value)
        except ConfigError:
            raise
        except (ValueError, KeyError) as exc:
            fail(ln, f"bad value for {key!r} in [{section}]: {exc}")
        except _UnknownKey:
            fail(ln, f"unknown key {key!r} in [{section}]")
    _validate(cfg, seen, name)
    return cfg


class _UnknownKey(Exception):
    pass


def _apply_key(cfg: RunConfig, section: str, key: str, value: str):
    if section == "mesh":
        m = cfg.mesh
        if key == "generator":
            if value not in ("cube", "box", "rect", "file"):
                raise ValueError(f"unknown generator {value!r}")
            m.generator = value
        elif key == "n":
            m.n = int(value)
            if m.n < 1:
                raise ValueError("n must be >= 1")
        elif key == "divisions":
            m.divisions = _ints(value)
        elif key == "lengths":
            m.lengths = _floats(value)
        elif key == "origin":
            m.origin = _floats(value)
        elif key == "file":
            m.generator, m.path = "file", value
        else:
            raise _UnknownKey
    elif section == "material":
        mt = cfg.material
        if key == "e":
            mt.e = float(value)
            if mt.e <= 0:
                raise ValueError("E must be positive")
        elif key == "nu":
            mt.nu = float(value)
            if not -1.0 < mt.nu < 0.5:
                raise ValueError("nu must lie in (-1, 0.5)")
        elif key == "rho":
            mt.rho = float(value)
            if mt.rho <= 0:
                raise ValueError("rho must be positive")
        else:
            raise _UnknownKey
    elif section == "basis":
        b = cfg.basis
        if key == "kind":
            if value not in BASIS_NAMES:
                raise ValueError(f"unknown basis kind {value!r}; expected one of {BASIS_NAMES}")
            b.kind = value
        elif key == "p":
            b.p = int(value)
            if b.p < 1:
                raise ValueError("polynomial order must be >= 1")
        elif key == "k":
            b.k = float(value)
            if not 0.0 <= b.k <= 1.0:
                raise ValueError("k must lie in [0, 1]")
        elif key == "lambda":
            b.lam = float(value)
            if b.lam < 0:
                raise ValueError("lambda must be >= 0")
        elif key == "alpha":
            b.alpha = float(value)
        elif key == "beta":
            b.beta = float(value)
        else:
            raise _UnknownKey
    elif section == "time":
        t = cfg.time
        if key == "scheme":
            if value not in ("static", "explicit", "newmark"):
                raise ValueError(f"unknown scheme {value!r}")
            t.scheme = value
        elif key == "dt":
            t.dt = float(value)
        elif key == "steps":
            t.steps = int(value)
        elif key == "t_end":
            t.t_end = float(value)
        elif key == "cfl_delta":
            t.cfl_delta = float(value)
        elif key == "cfl_mode":
            if value not in ("AsPrinted", "PhysicalSqrt"):
                raise ValueError(f"unknown CFL mode {value!r}")
            t.cfl_mode = value
        elif key == "snapshot_stride":
            t.snapshot_stride = int(value)
        else:
            raise _UnknownKey
    elif section == "solver":
        s = cfg.solver
        if key == "preconditioner":
            if value not in ("diagonal", "sgs", "none"):
                raise ValueError(f"unknown preconditioner {value!r}")
            s.preconditioner = value
        elif key == "tol":
            s.tol = float(value)
            if not 0 < s.tol < 1:
                raise ValueError("tolerance must lie in (0, 1)")
        elif key == "maxit":
            s.maxit = int(value)
        elif key == "condense":
            s.condense = _bool(value)
        else:
            raise _UnknownKey
    elif section == "newton":
        nw = cfg.newton
        if key == "tol":
            nw.tol = float(value)
        elif key == "maxit":
            nw.maxit = int(value)
        else:
            raise _UnknownKey
    elif section == "mms":
        if key == "field":
            if value not in FIELD_REGISTRY:
                raise ValueError(
                    f"unknown field {value!r}; available: {sorted(FIELD_REGISTRY)}")
            cfg.mms.field = value
        else:
            raise _UnknownKey
    elif section == "loading":
        ld = cfg.loading
        if key.startswith("traction_"):
            ld.tractions[key[len("traction_"):]] = _floats(value, 3)
        elif key == "body_force":
            ld.body_force = _floats(value, 3)
        elif key == "modulation":
            if value not in ("constant", "sine"):
                raise ValueError(f"unknown modulation {value!r}")
            ld.modulation = value
        elif key == "period":
            ld.period = float(value)
            if ld.period <= 0:
                raise ValueError("period must be positive")
        else:
            raise _UnknownKey
    elif section == "dirichlet":
        d = cfg.dirichlet
        if key == "faces":
            d.faces = tuple(value.split())
        elif key == "components":
            d.components = tuple(_COMP[c] for c in value.split())
        else:
            raise _UnknownKey
    elif section == "initial":
        ic = cfg.initial
        if key == "u0":
            ic.u0 = _floats(value, 3)
        elif key == "v0":
            ic.v0 = _floats(value, 3)
        else:
            raise _UnknownKey
    elif section == "contact":
        c = cfg.contact
        if key == "point":
            c.point = _floats(value, 3)
        elif key == "normal":
            c.normal = _floats(value, 3)
        elif key == "surface":
            c.surface = value
        elif key == "eps_n":
            c.eps_n = float(value)
            if c.eps_n <= 0:
                raise ValueError("eps_n must be positive")
        elif key == "deps_n":
            c.deps_n = float(value)
        elif key == "gap_tol":
            c.gap_tol = float(value)
        elif key == "stress_tol":
            c.stress_tol = float(value)
        else:
            raise _UnknownKey
    elif section == "output":
        o = cfg.output
        if key == "outdir":
            o.outdir = value
        elif key == "vtk":
            o.vtk = value
        elif key == "vtk_resolution":
            o.vtk_resolution = int(value)
            if o.vtk_resolution < 1:
                raise ValueError("vtk_resolution must be >= 1")
        elif key == "stats_csv":
            o.stats_csv = value
        else:
            raise _UnknownKey


def _validate(cfg: RunConfig, seen: set, name: str):
    if (cfg.mms is None) == (cfg.loading is None):
        raise ConfigError(
            f"{name}: exactly one of [mms] and [loading] must be present")
    if cfg.mms is not None and not cfg.mms.field:
        raise ConfigError(f"{name}: [mms] needs a 'field' key")
    if cfg.basis.kind == "SDME_H" and "basis" in seen and cfg.basis.lam <= 0.0:
        raise ConfigError(f"{name}: basis kind SDME_H needs a positive 'lambda'")
    if cfg.time.scheme != "static":
        has_dt = cfg.time.dt > 0 or cfg.time.cfl_delta > 0
        if not has_dt:
            raise ConfigError(f"{name}: [time] needs 'dt' or 'cfl_delta' for transient runs")
        if cfg.time.steps <= 0 and cfg.time.t_end <= 0:
            raise ConfigError(f"{name}: [time] needs 'steps' or 't_end'")
    if cfg.contact.enabled and not cfg.contact.surface:
        raise ConfigError(f"{name}: [contact] needs a 'surface' tag")
    if cfg.mesh.generator == "file" and not cfg.mesh.path:
        raise ConfigError(f"{name}: [mesh] generator 'file' needs a 'file' path")
    need = {"box": 3, "rect": 2}.get(cfg.mesh.generator, 0)
    if need and (len(cfg.mesh.divisions) < need or len(cfg.mesh.lengths) < need):
        raise ConfigError(
            f"{name}: [mesh] generator '{cfg.mesh.generator}' needs {need} "
            "divisions and lengths")


def parse_config_file(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def serialize_config(cfg: RunConfig) -> str:
    """Write a RunConfig back to the textual format (round-trippable)."""
    out = []

    def sec(title, pairs):
        out.append(f"[{title}]")
        for k, v in pairs:
            out.append(f"{k} = {v}")
        out.append("")

    def nums(vals):
        return " ".join(repr(float(v)) for v in vals)

    m = cfg.mesh
    mesh_pairs = [("generator", m.generator)]
    if m.generator == "cube":
        mesh_pairs.append(("n", m.n))
    elif m.generator in ("box", "rect"):
        mesh_pairs.append(("divisions", " ".join(str(d) for d in m.divisions)))
    elif m.generator == "file":
        mesh_pairs.append(("file", m.path))
    if m.generator != "file":
        mesh_pairs += [("lengths", nums(m.lengths)), ("origin", nums(m.origin))]
    sec("mesh", mesh_pairs)
    mt = cfg.material
    sec("material", [("e", repr(mt.e)), ("nu", repr(mt.nu)), ("rho", repr(mt.rho))])
    b = cfg.basis
    sec("basis", [("kind", b.kind), ("p", b.p), ("k", repr(b.k)),
                  ("lambda", repr(b.lam)), ("alpha", repr(b.alpha)), ("beta", repr(b.beta))])
    t = cfg.time
    sec("time", [("scheme", t.scheme), ("dt", repr(t.dt)), ("steps", t.steps),
                 ("t_end", repr(t.t_end)), ("cfl_delta", repr(t.cfl_delta)),
                 ("cfl_mode", t.cfl_mode), ("snapshot_stride", t.snapshot_stride)])
    s = cfg.solver
    sec("solver", [("preconditioner", s.preconditioner), ("tol", repr(s.tol)),
                   ("maxit", s.maxit), ("condense", str(s.condense).lower())])
    nw = cfg.newton
    sec("newton", [("tol", repr(nw.tol)), ("maxit", nw.maxit)])
    if cfg.mms is not None:
        sec("mms", [("field", cfg.mms.field)])
    if cfg.loading is not None:
        ld = cfg.loading
        pairs = [(f"traction_{tag}", nums(v)) for tag, v in sorted(ld.tractions.items())]
        pairs += [("body_force", nums(ld.body_force)), ("modulation", ld.modulation),
                  ("period", repr(ld.period))]
        sec("loading", pairs)
    d = cfg.dirichlet
    if d.faces:
        comp_names = " ".join("xyz"[c] for c in d.components)
        sec("dirichlet", [("faces", " ".join(d.faces)), ("components", comp_names)])
    ic = cfg.initial
    if any(ic.u0) or any(ic.v0):
        sec("initial", [("u0", nums(ic.u0)), ("v0", nums(ic.v0))])
    if cfg.contact.enabled:
        c = cfg.contact
        sec("contact", [("point", nums(c.point)), ("normal", nums(c.normal)),
                        ("surface", c.surface), ("eps_n", repr(c.eps_n)),
                        ("deps_n", repr(c.deps_n)), ("gap_tol", repr(c.gap_tol)),
                        ("stress_tol", repr(c.stress_tol))])
    o = cfg.output
    out_pairs = [("outdir", o.outdir)]
    if o.vtk:
        out_pairs.append(("vtk", o.vtk))
    out_pairs += [("vtk_resolution", o.vtk_resolution), ("stats_csv", o.stats_csv)]
    sec("output", out_pairs)
    return "\n".join(out)
