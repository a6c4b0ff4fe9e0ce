"""Element kernels, global assembly and manufactured-solution forcing.

Total-Lagrangian kinematics: all integrals live on the reference
configuration, deformation enters through F = I + Grad u. Element loops
batch every quadrature point of an element into single BLAS calls, which
is what keeps the high-order tangents affordable.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fields import AnalyticField
from .material import NeoHookean, material_tangent, pk2_stress
from .meshdof import DofMap, Mesh, isoparametric_map
from .quadrature import QuadratureRule, gauss_rule, gll_rule
from .tensorelem import FACE_TABLE, EDGE_TABLE, TensorElement

__all__ = [
    "ElementInversionError",
    "ElementTables",
    "FemProblem",
    "mms_body_force",
    "mms_traction",
    "expand_free",
]

_VOIGT = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))


class ElementInversionError(RuntimeError):
    """det F <= 0 at a quadrature point (element id and point attached)."""

    def __init__(self, elem_id: int, qp: int):
        super().__init__(f"element {elem_id} inverted at quadrature point {qp}")
        self.elem_id = elem_id
        self.qp = qp


def n_workers() -> int:
    return max(1, int(os.environ.get("SDMEFEM_THREADS", "1")))


def _map_elements(fn, n: int):
    """Apply fn to 0..n-1, in order; threads only when requested.

    Results are merged in element-id order regardless of completion order,
    so assembled operators are reproducible for any fixed thread count.
    """
    w = n_workers()
    if w == 1 or n == 1:
        return [fn(e) for e in range(n)]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, range(n)))


@dataclass
class ElementTables:
    """Quadrature-point data of one element: positions, shape values,
    physical gradients and weighted Jacobians."""

    pts: np.ndarray  # (nq, dim) physical positions
    vals: np.ndarray  # (nq, nfun)
    grad: np.ndarray  # (nq, nfun, dim) gradients w.r.t. material coords
    wdet: np.ndarray  # (nq,) rule weight times det J


def build_tables(mesh: Mesh, element: TensorElement, rule: QuadratureRule) -> list[ElementTables]:
    xi, w, vals, dref = element.tabulate(rule)
    out = []
    for e in range(mesh.n_elems):
        x, jac, det = isoparametric_map(mesh, e, xi)
        jinv = np.linalg.inv(jac)
        grad = np.einsum("qfd,qdc->qfc", dref, jinv)
        out.append(ElementTables(x, vals, grad, w * det))
    return out


# ---------------------------------------------------------------------------
# element kernels (dim = 3; the 2D path only needs mass/traction plumbing)

def deformation_state(tab: ElementTables, u_elem: np.ndarray, elem_id: int = -1):
    """F, C and det F at the quadrature points for element coefficients
    u_elem of shape (nfun, dim)."""
    h = np.einsum("qfd,fc->qcd", tab.grad, u_elem)
    f = h + np.eye(h.shape[-1])
    det = np.linalg.det(f)
    if np.any(det <= 0.0):
        raise ElementInversionError(elem_id, int(np.argmax(det <= 0.0)))
    c = np.einsum("qkc,qkd->qcd", f, f)
    return f, c, det


def element_internal_force(tab: ElementTables, mat: NeoHookean, u_elem: np.ndarray,
                           elem_id: int = -1) -> np.ndarray:
    """Internal force int (F S) : Grad(dN) dOmega0, flattened (nfun*dim,)."""
    f, c, _ = deformation_state(tab, u_elem, elem_id)
    s, _ = pk2_stress(mat, c)
    p1 = f @ s
    r = np.einsum("q,qfd,qcd->fc", tab.wdet, tab.grad, p1)
    return r.reshape(-1)


def strain_energy(tab: ElementTables, mat: NeoHookean, u_elem: np.ndarray,
                  elem_id: int = -1) -> float:
    _, c, _ = deformation_state(tab, u_elem, elem_id)
    _, psi = pk2_stress(mat, c)
    return float(tab.wdet @ psi)


def _b_matrix(f: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Strain-displacement operator delta E_voigt = B delta u, engineering
    shear; shape (nq, 6, nfun*dim)."""
    nq, nfun, _ = grad.shape
    b = np.empty((nq, 6, nfun, 3))
    for a, (i, j) in enumerate(_VOIGT):
        if i == j:
            b[:, a] = grad[:, :, i, None] * f[:, None, :, i]
        else:
            b[:, a] = (grad[:, :, j, None] * f[:, None, :, i]
                       + grad[:, :, i, None] * f[:, None, :, j])
    return b.reshape(nq, 6, nfun * 3)


def element_tangent(tab: ElementTables, mat: NeoHookean, u_elem: np.ndarray,
                    elem_id: int = -1) -> np.ndarray:
    """Consistent tangent: material part B^T D B plus geometric part."""
    f, c, _ = deformation_state(tab, u_elem, elem_id)
    s, _ = pk2_stress(mat, c)
    d = material_tangent(mat, c)
    b = _b_matrix(f, tab.grad)
    tmp = (d * tab.wdet[:, None, None]) @ b
    k = np.tensordot(b, tmp, axes=([0, 1], [0, 1]))
    sw = s * tab.wdet[:, None, None]
    t2 = tab.grad @ sw
    kgs = np.tensordot(tab.grad, t2, axes=([0, 2], [0, 2]))
    nfun = tab.vals.shape[1]
    k4 = k.reshape(nfun, 3, nfun, 3)
    for comp in range(3):
        k4[:, comp, :, comp] += kgs
    return k


def element_mass(tab: ElementTables, mat: NeoHookean, dim: int) -> np.ndarray:
    """Consistent mass, component-block-diagonal, flattened (nfun*dim,)^2."""
    ms = (tab.vals * (mat.rho0 * tab.wdet)[:, None]).T @ tab.vals
    nfun = tab.vals.shape[1]
    m = np.zeros((nfun, dim, nfun, dim))
    for comp in range(dim):
        m[:, comp, :, comp] = ms
    return m.reshape(nfun * dim, nfun * dim)


# ---------------------------------------------------------------------------
# manufactured-solution forcing

def first_pk_stress(field: AnalyticField, mat: NeoHookean, x: np.ndarray, t: float):
    """First Piola-Kirchhoff stress of the fabricated field at points x."""
    g = field.grad(x, t)
    f = g + np.eye(3)
    c = np.einsum("qkc,qkd->qcd", f, f)
    s, _ = pk2_stress(mat, c)
    return f @ s


def mms_body_force(field: AnalyticField, mat: NeoHookean, x: np.ndarray, t: float,
                   h: float = 1e-5) -> np.ndarray:
    """Body force f = a - Div P / rho0 fabricated from the field.

    The stress divergence uses central finite differences with step h
    (pre-scaled by the caller to the domain size); the static case falls
    out naturally because static fields carry zero acceleration.
    """
    x = np.asarray(x, dtype=float)
    div_p = np.zeros((len(x), 3))
    for d in range(3):
        dx = np.zeros(3)
        dx[d] = h
        pp = first_pk_stress(field, mat, x + dx, t)
        pm = first_pk_stress(field, mat, x - dx, t)
        div_p += (pp[:, :, d] - pm[:, :, d]) / (2.0 * h)
    return field.a(x, t) - div_p / mat.rho0


def mms_traction(field: AnalyticField, mat: NeoHookean, x: np.ndarray, t: float,
                 normal: np.ndarray) -> np.ndarray:
    """Reference traction P . N of the fabricated field on a boundary face.

    ``normal`` is one unit vector or one per point.
    """
    p = first_pk_stress(field, mat, x, t)
    normal = np.broadcast_to(np.asarray(normal, dtype=float), (len(x), 3))
    return np.einsum("qcd,qd->qc", p, normal)


# ---------------------------------------------------------------------------
# boundary face quadrature

@dataclass
class FaceTables:
    """Quadrature data of one boundary face in the reference configuration."""

    elem: int
    pts: np.ndarray  # (nq, dim) physical positions
    vals: np.ndarray  # (nq, nfun) shape values on the face
    warea: np.ndarray  # (nq,) weight times surface Jacobian
    normal: np.ndarray  # (nq, dim) outward unit reference normals


def build_face_tables(mesh: Mesh, element: TensorElement, tag: str,
                      rule: QuadratureRule) -> list[FaceTables]:
    if tag not in mesh.boundary_sides:
        raise KeyError(f"unknown boundary tag {tag!r}")
    out = []
    for e, lf in mesh.boundary_sides[tag]:
        if mesh.dim == 3:
            axis, side, d1, d2, _ = FACE_TABLE[lf]
            pts1, w1 = rule.points, rule.weights
            grid = np.array([(a, b) for a in pts1 for b in pts1])
            w2 = np.einsum("a,b->ab", w1, w1).ravel()
            xi = np.zeros((len(grid), 3))
            xi[:, axis] = 1.0 if side else -1.0
            xi[:, d1], xi[:, d2] = grid[:, 0], grid[:, 1]
            x, jac, _ = isoparametric_map(mesh, e, xi)
            t1, t2 = jac[:, :, d1], jac[:, :, d2]
            nvec = np.cross(t1, t2)
            area = np.linalg.norm(nvec, axis=1)
            nvec /= area[:, None]
            outward = (1.0 if side else -1.0) * jac[:, :, axis]
            flip = np.sign(np.einsum("qc,qc->q", nvec, outward))
            nvec *= flip[:, None]
            warea = w2 * area
        else:
            eaxis, fixed, _, _ = EDGE_TABLE[2][lf]
            xi = np.zeros((rule.n, 2))
            xi[:, 1 - eaxis] = 1.0 if fixed[0] else -1.0
            xi[:, eaxis] = rule.points
            x, jac, _ = isoparametric_map(mesh, e, xi)
            tvec = jac[:, :, eaxis]
            length = np.linalg.norm(tvec, axis=1)
            nvec = np.stack([tvec[:, 1], -tvec[:, 0]], axis=1) / length[:, None]
            outward = (1.0 if fixed[0] else -1.0) * jac[:, :, 1 - eaxis]
            flip = np.sign(np.einsum("qc,qc->q", nvec, outward))
            nvec *= flip[:, None]
            warea = rule.weights * length
        vals, _ = element.shape_eval(xi)
        out.append(FaceTables(e, x, vals, warea, nvec))
    return out


def surface_traction(face: FaceTables, traction: np.ndarray, nfun: int, dim: int) -> np.ndarray:
    """Consistent load vector int N_i tbar dGamma for one face, (nfun*dim,)."""
    r = np.einsum("q,qf,qc->fc", face.warea, face.vals, traction)
    return r.reshape(-1)


# ---------------------------------------------------------------------------
# global assembly

def expand_free(dmap: DofMap, u_free: np.ndarray) -> np.ndarray:
    """Free-dof vector -> full vector over all modes (Dirichlet rows zero)."""
    full = np.zeros(dmap.n_modes * dmap.dim)
    mask = dmap.free_map >= 0
    full[mask] = u_free[dmap.free_map[mask]]
    return full


class FemProblem:
    """Mesh + basis + material bound together with cached element tables."""

    def __init__(self, mesh: Mesh, element: TensorElement, dmap: DofMap,
                 mat: NeoHookean, rule: QuadratureRule | None = None,
                 collocation_mass: bool = False):
        self.mesh = mesh
        self.element = element
        self.dmap = dmap
        self.mat = mat
        if rule is None:
            if collocation_mass:
                if not element.basis.kind.is_nodal:
                    raise ValueError("collocation (diagonal) mass needs the nodal basis")
                rule = gll_rule(element.P + 1)
            else:
                # P+1 Gauss points per direction: exact for the degree-2P
                # mass integrand and the integration level the reference
                # error tables were produced with.
                rule = gauss_rule(element.P + 1)
        self.rule = rule
        self.tables = build_tables(mesh, element, rule)
        self._edofs = [dmap.elem_vector_dofs(e) for e in range(mesh.n_elems)]
        self._mass = None

    @property
    def n_free(self) -> int:
        return self.dmap.n_free

    def gather(self, e: int, u_free: np.ndarray) -> np.ndarray:
        """Element coefficients (nfun, dim) from a free-dof vector."""
        dofs, signs = self._edofs[e]
        u = np.where(dofs >= 0, u_free[dofs], 0.0) * signs
        return u.reshape(self.element.nfun, self.dmap.dim)

    def _scatter_vec(self, out, e, r):
        dofs, signs = self._edofs[e]
        mask = dofs >= 0
        np.add.at(out, dofs[mask], (r * signs)[mask])

    def assemble_vector(self, element_fn) -> np.ndarray:
        out = np.zeros(self.n_free)
        for e, r in enumerate(_map_elements(element_fn, self.mesh.n_elems)):
            self._scatter_vec(out, e, r)
        return out

    def assemble_matrix(self, element_fn) -> sp.csr_matrix:
        """Scatter-add dense element matrices into a CSR over free dofs."""
        n = self.n_free
        acc = sp.csr_matrix((n, n))
        for e, k in enumerate(_map_elements(element_fn, self.mesh.n_elems)):
            dofs, signs = self._edofs[e]
            k = k * np.outer(signs, signs)
            mask = dofs >= 0
            kd = k[np.ix_(mask, mask)]
            free = dofs[mask]
            rows = np.repeat(free, len(free))
            cols = np.tile(free, len(free))
            acc = acc + sp.csr_matrix((kd.ravel(), (rows, cols)), shape=(n, n))
        acc.sum_duplicates()
        return acc

    def element_matrices(self, element_fn):
        """(dense matrix, free dof ids, signs) per element, in order.

        Lazy in the single-worker case so condensation can consume one
        element matrix at a time (the high orders are memory-bound).
        """
        if n_workers() == 1 and self.mesh.n_elems > 1:
            return ((element_fn(e), *self._edofs[e]) for e in range(self.mesh.n_elems))
        mats = _map_elements(element_fn, self.mesh.n_elems)
        return [(k, *self._edofs[e]) for e, k in enumerate(mats)]

    def internal_force(self, u_free: np.ndarray) -> np.ndarray:
        return self.assemble_vector(
            lambda e: element_internal_force(self.tables[e], self.mat, self.gather(e, u_free), e)
        )

    def tangent_matrices(self, u_free: np.ndarray):
        return self.element_matrices(
            lambda e: element_tangent(self.tables[e], self.mat, self.gather(e, u_free), e)
        )

    def tangent(self, u_free: np.ndarray) -> sp.csr_matrix:
        return self.assemble_matrix(
            lambda e: element_tangent(self.tables[e], self.mat, self.gather(e, u_free), e)
        )

    def mass_matrices(self):
        """Materialized (matrix, dofs, signs) list; reused across steps."""
        return list(self.element_matrices(
            lambda e: element_mass(self.tables[e], self.mat, self.dmap.dim)
        ))

    def mass(self) -> sp.csr_matrix:
        if self._mass is None:
            self._mass = self.assemble_matrix(
                lambda e: element_mass(self.tables[e], self.mat, self.dmap.dim)
            )
        return self._mass

    def total_strain_energy(self, u_free: np.ndarray) -> float:
        return sum(
            strain_energy(self.tables[e], self.mat, self.gather(e, u_free), e)
            for e in range(self.mesh.n_elems)
        )

    def body_force_vector(self, force_at) -> np.ndarray:
        """Load vector of a body force field; force_at(pts) -> (nq, dim)."""

        def elem_load(e):
            tab = self.tables[e]
            f = force_at(tab.pts)
            r = np.einsum("q,qf,qc->fc", self.mat.rho0 * tab.wdet, tab.vals, f)
            return r.reshape(-1)

        return self.assemble_vector(elem_load)

    def traction_vector(self, faces: list[FaceTables], traction_at) -> np.ndarray:
        """Load vector of boundary tractions; traction_at(face) -> (nq, dim)."""
        out = np.zeros(self.n_free)
        for face in faces:
            r = surface_traction(face, traction_at(face), self.element.nfun, self.dmap.dim)
            self._scatter_vec(out, face.elem, r)
        return out

    def mms_load(self, field: AnalyticField, t: float, traction_faces=None,
                 fd_step: float | None = None) -> np.ndarray:
        """Body force plus boundary tractions fabricated from a field."""
        h = fd_step if fd_step is not None else 1e-5 * self.mesh.bbox_scale()
        rhs = self.body_force_vector(lambda pts: mms_body_force(field, self.mat, pts, t, h))
        if traction_faces:
            rhs += self.traction_vector(
                traction_faces,
                lambda face: mms_traction(field, self.mat, face.pts, t, face.normal),
            )
        return rhs

    def l2_error(self, u_free: np.ndarray, field: AnalyticField, t: float) -> np.ndarray:
        """Componentwise L2(Omega0) error of the discrete field."""
        err2 = np.zeros(self.dmap.dim)
        for e in range(self.mesh.n_elems):
            tab = self.tables[e]
            uh = tab.vals @ self.gather(e, u_free)
            uex = field.u(tab.pts, t)[:, : self.dmap.dim]
            err2 += tab.wdet @ (uh - uex) ** 2
        return np.sqrt(err2)

    def l2_project(self, values_at) -> np.ndarray:
        """Global L2 projection of a function given by values_at(pts)->(nq,dim).

        Solves M c = (N, f) with the consistent mass; used for initial
        conditions of transient runs.
        """
        from .solver import pcg

        rhs = self.body_force_vector(lambda pts: values_at(pts) / self.mat.rho0)
        sol, _ = pcg(self.mass(), rhs, precond="diagonal", tol=1e-14, maxit=2000)
        return sol
