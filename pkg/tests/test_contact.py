import numpy as np
import pytest

from sdmefem.basis1d import BasisKind, build_basis
from sdmefem.contact import ContactParams, PenaltyContact, RigidObstacle, gap
from sdmefem.femcore import FemProblem, build_face_tables
from sdmefem.material import NeoHookean
from sdmefem.meshdof import build_dofmap, gen_box_mesh
from sdmefem.tensorelem import TensorElement

PLANE = RigidObstacle(np.zeros(3), np.array([0.0, 1.0, 0.0]))


def block_problem(P=2, gap0=0.0):
    """Unit-ish block sitting gap0 above the y=0 plane."""
    mesh = gen_box_mesh((1, 1, 1), (1.0, 1.0, 1.0), origin=(0.0, gap0, 0.0))
    elem = TensorElement.create(3, build_basis(P, BasisKind("SDME_M")))
    dmap = build_dofmap(mesh, elem)
    mat = NeoHookean.from_engineering(100.0, 0.3, 1.0)
    return FemProblem(mesh, elem, dmap, mat)


# ------------------------------------------------------------------------- gap

def test_gap_values():
    assert gap(PLANE, np.array([0.5, 0.0, 0.2])) == pytest.approx(0.0)
    assert gap(PLANE, PLANE.point + 0.1 * PLANE.outward_normal) == pytest.approx(0.1)
    assert gap(PLANE, PLANE.point - 0.05 * PLANE.outward_normal) == pytest.approx(-0.05)


def test_obstacle_normalizes():
    obs = RigidObstacle(np.zeros(3), np.array([0.0, 2.0, 0.0]))
    assert np.linalg.norm(obs.outward_normal) == pytest.approx(1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ContactParams(-1.0)
    with pytest.raises(ValueError):
        ContactParams(1.0, gap_tol=0.0)


# ---------------------------------------------------------------- contribution

def test_no_penetration_no_forces():
    prob = block_problem(gap0=0.1)
    contact = PenaltyContact(prob, PLANE, ContactParams(1e4), "ymin")
    fc = contact.evaluate_forces(np.zeros(prob.n_free))
    assert np.abs(fc.force).max() == 0.0
    assert fc.stiffness is None
    assert not fc.active.any()
    assert fc.settled


def test_uniform_penetration_total_force():
    prob = block_problem(gap0=0.0)
    eps, d = 1e4, 1e-3
    contact = PenaltyContact(prob, PLANE, ContactParams(eps), "ymin")
    u = prob.l2_project(lambda pts: np.tile([0.0, -d, 0.0], (len(pts), 1)))
    fc = contact.evaluate_forces(u)
    assert fc.active.all()
    # total vertical force = eps * d * area (unit face)
    ey = prob.l2_project(lambda pts: np.tile([0.0, 1.0, 0.0], (len(pts), 1)))
    total = float(ey @ fc.force)
    assert total == pytest.approx(eps * d * 1.0, rel=1e-10)
    assert fc.pressures.min() >= 0.0


def test_contact_stiffness_psd():
    prob = block_problem(gap0=0.0)
    contact = PenaltyContact(prob, PLANE, ContactParams(1e4), "ymin")
    u = prob.l2_project(lambda pts: np.tile([0.0, -1e-3, 0.0], (len(pts), 1)))
    fc = contact.evaluate_forces(u)
    k = fc.stiffness.toarray()
    assert np.abs(k - k.T).max() <= 1e-12 * np.abs(k).max()
    w = np.linalg.eigvalsh(k)
    assert w[0] >= -1e-10 * w[-1]


def test_contact_stiffness_is_force_jacobian():
    prob = block_problem(P=3, gap0=0.0)
    contact = PenaltyContact(prob, PLANE, ContactParams(1e4), "ymin")
    rng = np.random.default_rng(0)
    u0 = prob.l2_project(lambda pts: np.tile([0.0, -2e-3, 0.0], (len(pts), 1)))
    du = rng.standard_normal(prob.n_free)
    du /= np.linalg.norm(du)
    fc = contact.evaluate_forces(u0)
    eps = 1e-7
    fp = contact.evaluate_forces(u0 + eps * du).force
    fm = contact.evaluate_forces(u0 - eps * du).force
    fd = (fp - fm) / (2 * eps)
    kd = -(fc.stiffness @ du)  # stiffness is the negative force gradient
    scale = max(np.abs(fd).max(), 1e-12)
    assert np.abs(fd - kd).max() <= 1e-5 * scale


def test_static_penalty_equilibrium():
    """Block pressed by pressure p: equilibrium penetration ~ p / eps_N.

    Lateral rigid modes are fixed by confining the side faces (frictionless
    contact only stiffens the normal direction); the initial state carries a
    small penetration so the active set is nonempty from the start.
    """
    mesh = gen_box_mesh((1, 1, 1), (1.0, 1.0, 1.0))
    elem = TensorElement.create(3, build_basis(2, BasisKind("SDME_M")))
    dmap = build_dofmap(mesh, elem, [("xmin", (0,)), ("xmax", (0,)),
                                     ("zmin", (2,)), ("zmax", (2,))])
    mat = NeoHookean.from_engineering(100.0, 0.3, 1.0)
    prob = FemProblem(mesh, elem, dmap, mat)
    eps_n, p = 1e6, 10.0
    contact = PenaltyContact(prob, PLANE, ContactParams(eps_n, gap_tol=1e-3), "ymin")
    faces = build_face_tables(prob.mesh, prob.element, "ymax", prob.rule)
    rhs = prob.traction_vector(faces, lambda f: np.tile([0.0, -p, 0.0], (len(f.pts), 1)))
    u = prob.l2_project(lambda pts: np.tile([0.0, -5e-6, 0.0], (len(pts), 1)))
    from sdmefem.dynamics import SolverConfig, make_solver

    cfg = SolverConfig(precond="sgs", tol=1e-12, condense=True)
    for _ in range(30):
        fc = contact.evaluate_forces(u)
        psi = rhs + fc.force - prob.internal_force(u)
        if np.linalg.norm(psi) <= 1e-10 * np.linalg.norm(rhs) and fc.settled:
            break
        solver = make_solver(problem=prob, element_matrices=prob.tangent_matrices(u), cfg=cfg)
        if fc.stiffness is not None:
            from sdmefem.dynamics import _add_contact_stiffness

            solver = _add_contact_stiffness(solver, fc.stiffness, cfg)
        du, _ = solver.solve(psi)
        u = u + du
    _, gaps = contact.update_active_set(u)
    pen = max(float(-g.min()) for g in gaps)
    assert pen == pytest.approx(p / eps_n, rel=0.05)
    assert pen <= contact.params.gap_tol


def test_release_phase_drops_out():
    prob = block_problem(gap0=0.0)
    contact = PenaltyContact(prob, PLANE, ContactParams(1e4), "ymin")
    down = prob.l2_project(lambda pts: np.tile([0.0, -1e-3, 0.0], (len(pts), 1)))
    fc = contact.evaluate_forces(down)
    assert fc.active.any()
    up = prob.l2_project(lambda pts: np.tile([0.0, 1e-3, 0.0], (len(pts), 1)))
    fc2 = contact.evaluate_forces(up)
    assert not fc2.active.any()
    assert np.abs(fc2.force).max() == 0.0


def test_eps_increment_on_excess_penetration():
    prob = block_problem(gap0=0.0)
    params = ContactParams(1e4, deps_n=1e3, gap_tol=1e-5)
    contact = PenaltyContact(prob, PLANE, params, "ymin")
    u = prob.l2_project(lambda pts: np.tile([0.0, -1e-3, 0.0], (len(pts), 1)))
    contact.accept_step(u)  # penetration 1e-3 > gap_tol 1e-5
    assert contact.params.eps_n == pytest.approx(1e4 + 1e3)
    eps, pen, t_min, n_act = contact.history[-1]
    assert pen == pytest.approx(1e-3, rel=1e-6)
    assert t_min >= 0.0


def test_penalty_energy():
    prob = block_problem(gap0=0.0)
    eps_n, d = 1e4, 2e-3
    contact = PenaltyContact(prob, PLANE, ContactParams(eps_n), "ymin")
    u = prob.l2_project(lambda pts: np.tile([0.0, -d, 0.0], (len(pts), 1)))
    # uniform penetration d over unit area: E = eps/2 d^2
    assert contact.penalty_energy(u) == pytest.approx(0.5 * eps_n * d * d, rel=1e-9)


def test_pressure_profile_sorted():
    prob = block_problem(gap0=0.0)
    contact = PenaltyContact(prob, PLANE, ContactParams(1e4), "ymin")
    u = prob.l2_project(lambda pts: np.tile([0.0, -1e-3, 0.0], (len(pts), 1)))
    prof = contact.pressure_profile(u)
    assert np.all(np.diff(prof[:, 0]) >= 0)
    assert prof[:, 1].min() >= 0.0


def test_impact_symmetry():
    """A symmetric bar impacting normally stays mirror-symmetric.

    Tight solver tolerances so the check sees the formulation, not solver
    noise; runs through first touchdown and peak compression.
    """
    from sdmefem.meshdof import inverse_map
    from sdmefem.runner import run_config
    from sdmefem.scenarios import make_scenario

    cfg = make_scenario("bar-impact")
    cfg.time.steps = 100
    cfg.newton.tol = 1e-10
    cfg.solver.tol = 1e-12
    res = run_config(cfg, write_outputs=False)
    prob = res.problem
    rng = np.random.default_rng(2)
    pts = np.column_stack([rng.uniform(0.003, 0.024, 6),
                           rng.uniform(0.006, 0.1, 6),
                           rng.uniform(-0.024, 0.024, 6)])

    def field(x):
        for e in range(prob.mesh.n_elems):
            xi = inverse_map(prob.mesh, e, x)
            if np.all(np.abs(xi) <= 1 + 1e-9):
                v, _ = prob.element.shape_eval(xi[None])
                return v[0] @ prob.gather(e, res.u)
        raise AssertionError("point outside mesh")

    for x in pts:
        ua = field(x)
        ub = field(x * np.array([-1.0, 1.0, 1.0]))
        # mirror about x = 0: u_x odd, u_y/u_z even
        assert abs(ua[0] + ub[0]) <= 1e-8
        assert abs(ua[1] - ub[1]) <= 1e-8
        assert abs(ua[2] - ub[2]) <= 1e-8


def test_contact_2d_uniform_penetration():
    from sdmefem.meshdof import gen_rect_mesh

    mesh = gen_rect_mesh((2, 1), (1.0, 0.5))
    elem = TensorElement.create(2, build_basis(3, BasisKind("SDME_M")))
    dmap = build_dofmap(mesh, elem)
    mat = NeoHookean.from_engineering(100.0, 0.3, 1.0)
    prob = FemProblem(mesh, elem, dmap, mat)
    eps, d = 1e4, 1e-3
    contact = PenaltyContact(prob, PLANE, ContactParams(eps), "ymin")
    u = prob.l2_project(lambda pts: np.tile([0.0, -d], (len(pts), 1)))
    fc = contact.evaluate_forces(u)
    assert fc.active.all()
    ey = prob.l2_project(lambda pts: np.tile([0.0, 1.0], (len(pts), 1)))
    # unit-length contact edge: total force = eps * d * length
    assert float(ey @ fc.force) == pytest.approx(eps * d * 1.0, rel=1e-10)
