"""Structured meshes, isoparametric geometry and global DOF numbering.

Global modes are numbered entity by entity (vertices, edges, faces, then
element interiors) so that interior modes form a contiguous tail, which
the Schur condensation exploits. Modes shared between elements carry an
orientation rule: every edge/face has a canonical frame fixed by global
vertex ids, and each element maps its local tensor functions onto that
frame. For the modal families the map is a sign flip per reflection
(internal 1D functions have definite parity for symmetric Jacobi
weights); for the nodal basis it is an index reversal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensorelem import EDGE_TABLE, FACE_TABLE, VERTEX_BITS, TensorElement

__all__ = [
    "Mesh",
    "DofMap",
    "gen_cube_mesh",
    "gen_box_mesh",
    "gen_rect_mesh",
    "build_dofmap",
    "read_mesh",
    "write_mesh",
    "isoparametric_map",
    "geom_eval",
    "inverse_map",
]


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    """Conforming quad/hex mesh with derived edge and face tables."""

    dim: int
    coords: np.ndarray  # (nv, dim), meters
    elems: np.ndarray  # (ne, 2^dim) vertex ids, VTK corner order
    boundary: dict  # tag -> list of vertex tuples (2 in 2D, 4 in 3D)
    edge_verts: np.ndarray = field(init=False)  # (nedges, 2), low vid first
    elem_edges: np.ndarray = field(init=False)
    face_verts: np.ndarray | None = field(init=False, default=None)
    elem_faces: np.ndarray | None = field(init=False, default=None)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.elems = np.asarray(self.elems, dtype=int)
        if self.elems.shape[1] != 2**self.dim:
            raise MeshError("element connectivity does not match the dimension")
        self._build_edges()
        if self.dim == 3:
            self._build_faces()
        self._index_boundary()

    @property
    def n_vertices(self) -> int:
        return len(self.coords)

    @property
    def n_elems(self) -> int:
        return len(self.elems)

    @property
    def n_edges(self) -> int:
        return len(self.edge_verts)

    @property
    def n_faces(self) -> int:
        return 0 if self.face_verts is None else len(self.face_verts)

    def _build_edges(self):
        table = EDGE_TABLE[self.dim]
        lookup = {}
        self.elem_edges = np.empty((self.n_elems, len(table)), dtype=int)
        for e, conn in enumerate(self.elems):
            for le, (_, _, lo, hi) in enumerate(table):
                key = tuple(sorted((conn[lo], conn[hi])))
                self.elem_edges[e, le] = lookup.setdefault(key, len(lookup))
        self.edge_verts = np.array(sorted(lookup, key=lookup.get), dtype=int).reshape(-1, 2)

    def _build_faces(self):
        lookup = {}
        keys = []
        self.elem_faces = np.empty((self.n_elems, 6), dtype=int)
        for e, conn in enumerate(self.elems):
            for lf, (_, _, _, _, corners) in enumerate(FACE_TABLE):
                quad = tuple(conn[corners[bb]] for bb in ((0, 0), (1, 0), (1, 1), (0, 1)))
                key = tuple(sorted(quad))
                if key not in lookup:
                    lookup[key] = len(keys)
                    keys.append(quad)
                self.elem_faces[e, lf] = lookup[key]
        self.face_verts = np.array(keys, dtype=int)

    def _index_boundary(self):
        """Resolve tag -> [(elem, local_face)] and validate the tags."""
        owner = {}
        if self.dim == 3:
            for e in range(self.n_elems):
                for lf in range(6):
                    owner.setdefault(self.elem_faces[e, lf], []).append((e, lf))
            keyed = {tuple(sorted(self.face_verts[f])): f for f in range(self.n_faces)}
        else:
            for e in range(self.n_elems):
                for le in range(4):
                    owner.setdefault(self.elem_edges[e, le], []).append((e, le))
            keyed = {tuple(sorted(self.edge_verts[f])): f for f in range(self.n_edges)}
        self.boundary_sides = {}
        for tag, faces in self.boundary.items():
            sides = []
            for verts in faces:
                key = tuple(sorted(verts))
                if key not in keyed:
                    raise MeshError(f"boundary tag {tag!r} references a missing face {verts}")
                owners = owner[keyed[key]]
                if len(owners) != 1:
                    raise MeshError(f"boundary tag {tag!r} face {verts} is interior")
                sides.append(owners[0])
            self.boundary_sides[tag] = sides

    def interior_faces(self):
        """Pairs ((e1, lf1), (e2, lf2)) of element sides sharing a face/edge."""
        owner = {}
        table = self.elem_faces if self.dim == 3 else self.elem_edges
        for e in range(self.n_elems):
            for lf in range(table.shape[1]):
                owner.setdefault(table[e, lf], []).append((e, lf))
        return [tuple(v) for v in owner.values() if len(v) == 2]

    def min_edge_length(self) -> float:
        d = self.coords[self.edge_verts[:, 0]] - self.coords[self.edge_verts[:, 1]]
        return float(np.linalg.norm(d, axis=1).min())

    def bbox_scale(self) -> float:
        return float((self.coords.max(axis=0) - self.coords.min(axis=0)).max())


def gen_box_mesh(divisions, lengths, origin=None) -> Mesh:
    """Axis-aligned structured hex mesh: divisions (nx, ny, nz) cells."""
    nx, ny, nz = divisions
    lx, ly, lz = lengths
    if min(nx, ny, nz) < 1:
        raise MeshError("need at least one cell per axis")
    ox, oy, oz = origin if origin is not None else (0.0, 0.0, 0.0)
    xs = ox + np.linspace(0.0, lx, nx + 1)
    ys = oy + np.linspace(0.0, ly, ny + 1)
    zs = oz + np.linspace(0.0, lz, nz + 1)

    def vid(i, j, k):
        return (k * (ny + 1) + j) * (nx + 1) + i

    coords = np.array([(xs[i], ys[j], zs[k])
                       for k in range(nz + 1) for j in range(ny + 1) for i in range(nx + 1)])
    elems = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                elems.append([vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k),
                              vid(i, j + 1, k), vid(i, j, k + 1), vid(i + 1, j, k + 1),
                              vid(i + 1, j + 1, k + 1), vid(i, j + 1, k + 1)])

    def face_quads(fixed_axis, at_end):
        quads = []
        ranges = {0: (ny, nz), 1: (nx, nz), 2: (nx, ny)}[fixed_axis]
        idx_fix = {0: nx, 1: ny, 2: nz}[fixed_axis] if at_end else 0
        for b in range(ranges[1]):
            for a in range(ranges[0]):
                if fixed_axis == 0:
                    vs = [vid(idx_fix, a, b), vid(idx_fix, a + 1, b),
                          vid(idx_fix, a + 1, b + 1), vid(idx_fix, a, b + 1)]
                elif fixed_axis == 1:
                    vs = [vid(a, idx_fix, b), vid(a + 1, idx_fix, b),
                          vid(a + 1, idx_fix, b + 1), vid(a, idx_fix, b + 1)]
                else:
                    vs = [vid(a, b, idx_fix), vid(a + 1, b, idx_fix),
                          vid(a + 1, b + 1, idx_fix), vid(a, b + 1, idx_fix)]
                quads.append(tuple(vs))
        return quads

    boundary = {
        "xmin": face_quads(0, False), "xmax": face_quads(0, True),
        "ymin": face_quads(1, False), "ymax": face_quads(1, True),
        "zmin": face_quads(2, False), "zmax": face_quads(2, True),
    }
    return Mesh(3, coords, np.array(elems), boundary)


def gen_cube_mesh(n: int, lengths=(1.0, 1.0, 1.0)) -> Mesh:
    """n^3 hexahedra filling an axis-aligned box."""
    return gen_box_mesh((n, n, n), lengths)


def gen_rect_mesh(divisions, lengths, origin=(0.0, 0.0)) -> Mesh:
    """Structured quad mesh of (nx, ny) cells."""
    nx, ny = divisions
    lx, ly = lengths
    xs = origin[0] + np.linspace(0.0, lx, nx + 1)
    ys = origin[1] + np.linspace(0.0, ly, ny + 1)

    def vid(i, j):
        return j * (nx + 1) + i

    coords = np.array([(xs[i], ys[j]) for j in range(ny + 1) for i in range(nx + 1)])
    elems = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
             for j in range(ny) for i in range(nx)]
    boundary = {
        "xmin": [(vid(0, j), vid(0, j + 1)) for j in range(ny)],
        "xmax": [(vid(nx, j), vid(nx, j + 1)) for j in range(ny)],
        "ymin": [(vid(i, 0), vid(i + 1, 0)) for i in range(nx)],
        "ymax": [(vid(i, ny), vid(i + 1, ny)) for i in range(nx)],
    }
    return Mesh(2, coords, np.array(elems), boundary)


def write_mesh(mesh: Mesh, path):
    with open(path, "w") as fh:
        fh.write("VERTICES\n")
        for i, x in enumerate(mesh.coords):
            fh.write(f"{i} " + " ".join(repr(float(c)) for c in x) + "\n")
        fh.write("ELEMENTS\n")
        for i, conn in enumerate(mesh.elems):
            fh.write(f"{i} " + " ".join(str(v) for v in conn) + "\n")
        fh.write("BOUNDARY\n")
        for tag, faces in mesh.boundary.items():
            for verts in faces:
                fh.write(f"{tag} " + " ".join(str(v) for v in verts) + "\n")


def read_mesh(path) -> Mesh:
    """Read the textual mesh format (VERTICES / ELEMENTS / BOUNDARY)."""
    section = None
    verts, elems, boundary = {}, {}, {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line in ("VERTICES", "ELEMENTS", "BOUNDARY"):
                section = line
                continue
            parts = line.split()
            if section == "VERTICES":
                verts[int(parts[0])] = [float(p) for p in parts[1:]]
            elif section == "ELEMENTS":
                elems[int(parts[0])] = [int(p) for p in parts[1:]]
            elif section == "BOUNDARY":
                boundary.setdefault(parts[0], []).append(tuple(int(p) for p in parts[1:]))
            else:
                raise MeshError(f"{path}:{ln}: content before any section header")
    if not verts or not elems:
        raise MeshError(f"{path}: missing VERTICES or ELEMENTS section")
    coords = np.array([verts[i] for i in sorted(verts)])
    conn = np.array([elems[i] for i in sorted(elems)])
    dim = coords.shape[1]
    return Mesh(dim, coords, conn, boundary)


# ---------------------------------------------------------------------------
# isoparametric geometry (multilinear, vertex functions only)

def geom_eval(dim: int, xi: np.ndarray):
    """Multilinear geometry functions and gradients at points xi."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    bits = VERTEX_BITS[dim]
    npts = xi.shape[0]
    g = np.ones((npts, len(bits)))
    dg = np.ones((npts, len(bits), dim))
    for v, b in enumerate(bits):
        for d in range(dim):
            f = 0.5 * (1.0 + xi[:, d]) if b[d] else 0.5 * (1.0 - xi[:, d])
            df = 0.5 if b[d] else -0.5
            g[:, v] *= f
            for gd in range(dim):
                dg[:, v, gd] *= df if gd == d else f
    return g, dg


def isoparametric_map(mesh: Mesh, elem_id: int, xi):
    """Material point X, Jacobian J = dX/dxi and det J at local points."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    xc = mesh.coords[mesh.elems[elem_id]]
    g, dg = geom_eval(mesh.dim, xi)
    x = g @ xc
    jac = np.einsum("pvd,vc->pcd", dg, xc)
    det = np.linalg.det(jac)
    if np.any(det <= 0.0):
        raise MeshError(f"element {elem_id}: non-positive mapping Jacobian")
    return x, jac, det


def inverse_map(mesh: Mesh, elem_id: int, x, tol=1e-12, maxit=30) -> np.ndarray:
    """Local coordinates of a physical point by Newton iteration."""
    x = np.asarray(x, dtype=float)
    xi = np.zeros(mesh.dim)
    for _ in range(maxit):
        xp, jac, _ = isoparametric_map(mesh, elem_id, xi[None, :])
        r = xp[0] - x
        if np.linalg.norm(r) < tol:
            break
        xi = xi - np.linalg.solve(jac[0], r)
    return xi


# ---------------------------------------------------------------------------
# global DOF numbering

@dataclass
class DofMap:
    """Element-local to global mapping of scalar modes with orientation signs.

    ``gdof[e, i]`` is the global scalar mode of local function i of element
    e and ``gsign[e, i]`` its orientation sign. Vector DOFs interleave the
    displacement components (dof = mode*dim + comp); ``free_map`` sends a
    full vector dof to its index among the unconstrained ones (-1 when
    Dirichlet). Interior modes occupy the contiguous range starting at
    ``interior_offset``.
    """

    mesh: Mesh
    element: TensorElement
    gdof: np.ndarray
    gsign: np.ndarray
    n_modes: int
    interior_offset: int
    dirichlet: np.ndarray  # (n_modes, dim) bool
    free_map: np.ndarray
    n_free: int

    @property
    def P(self) -> int:
        return self.element.P

    @property
    def dim(self) -> int:
        return self.mesh.dim

    def elem_vector_dofs(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        """Free vector-dof ids (-1 if constrained) and signs, comp fastest."""
        dim = self.dim
        modes = np.repeat(self.gdof[e], dim) * dim + np.tile(np.arange(dim), self.element.nfun)
        signs = np.repeat(self.gsign[e], dim)
        return self.free_map[modes], signs

    def boundary_internal_partition(self):
        """Free dofs split into boundary modes and per-element interior groups."""
        dim = self.dim
        nint = (self.P - 1) ** dim
        boundary = self.free_map[: self.interior_offset * dim]
        boundary = boundary[boundary >= 0]
        groups = []
        for e in range(self.mesh.n_elems):
            start = (self.interior_offset + e * nint) * dim
            groups.append(self.free_map[start : start + nint * dim])
        return boundary, groups

    def apply_dirichlet(self, mode_ids, components):
        """Constrain the given scalar modes; recomputes the free numbering."""
        for c in components:
            self.dirichlet[mode_ids, c] = True
        mask = ~self.dirichlet.reshape(-1)
        self.free_map = np.where(mask, np.cumsum(mask) - 1, -1)
        self.n_free = int(mask.sum())


def _oriented_1d(m: int, flipped: bool, basis) -> tuple[int, float]:
    """Canonical 1D internal index and sign for a possibly reversed axis."""
    if not flipped:
        return m, 1.0
    if basis.kind.is_nodal:
        return basis.P + 2 - m, 1.0
    if basis.internal_parity is None:
        raise MeshError(
            "edge/face reversal needs definite-parity internal modes; "
            "use symmetric Jacobi weights (alpha == beta) on multi-element meshes"
        )
    return m, float(basis.internal_parity[m - 2])


def _face_frame(gvids: dict) -> tuple[bool, bool, bool]:
    """Orientation of a local face against its canonical frame.

    ``gvids[(ba, bb)]`` holds the global vertex id at in-plane bits
    (ba, bb). The canonical frame starts at the lowest global id and runs
    its first axis toward the smaller of the two adjacent corners. Returns
    (swap, flip_first_local_axis, flip_second_local_axis) where the flips
    tell whether the local axis runs against the canonical axis mapped to it.
    """
    (a0, b0) = min(gvids, key=gvids.get)
    ga = gvids[(1 - a0, b0)]
    gb = gvids[(a0, 1 - b0)]
    if ga <= gb:  # s along local a, t along local b
        return False, a0 == 1, b0 == 1
    return True, a0 == 1, b0 == 1


def build_dofmap(mesh: Mesh, element: TensorElement, dirichlet=None) -> DofMap:
    """Number the global modes and resolve per-element orientations.

    ``dirichlet`` is a sequence of (boundary_tag, components) pairs; all
    modes supported on the tagged faces are constrained for the given
    displacement components.
    """
    if element.dim != mesh.dim:
        raise MeshError("element dimension does not match the mesh")
    P = element.P
    dim = mesh.dim
    basis = element.basis
    nep = P - 1  # modes per edge
    n_face_modes = nep * nep
    edge_off = mesh.n_vertices
    if dim == 3:
        face_off = edge_off + mesh.n_edges * nep
        interior_off = face_off + mesh.n_faces * n_face_modes
    else:
        face_off = interior_off = edge_off + mesh.n_edges * nep
    n_modes = interior_off + mesh.n_elems * nep**dim

    gdof = np.empty((mesh.n_elems, element.nfun), dtype=int)
    gsign = np.ones((mesh.n_elems, element.nfun))
    edge_table = EDGE_TABLE[dim]

    for e in range(mesh.n_elems):
        conn = mesh.elems[e]
        for i, tag in enumerate(element.entity_class):
            kind = tag[0]
            if kind == "vertex":
                gdof[e, i] = conn[tag[1]]
            elif kind == "edge":
                le, m = tag[1], tag[2]
                ge = mesh.elem_edges[e, le]
                lo = edge_table[le][2]
                flipped = conn[lo] != mesh.edge_verts[ge, 0]
                mc, s = _oriented_1d(m, flipped, basis)
                gdof[e, i] = edge_off + ge * nep + (mc - 2)
                gsign[e, i] = s
            elif kind == "face" and dim == 3:
                lf, (m1, m2) = tag[1], tag[2]
                gf = mesh.elem_faces[e, lf]
                corners = FACE_TABLE[lf][4]
                gvids = {bb: conn[corners[bb]] for bb in corners}
                swap, flip_a, flip_b = _face_frame(gvids)
                ma, sa = _oriented_1d(m1, flip_a, basis)
                mb, sb = _oriented_1d(m2, flip_b, basis)
                ms, mt = (mb, ma) if swap else (ma, mb)
                gdof[e, i] = face_off + gf * n_face_modes + (ms - 2) * nep + (mt - 2)
                gsign[e, i] = sa * sb
            else:  # element interior ("body" in 3D, "face" in 2D)
                m = tag[-1]
                lex = 0
                for md in m:
                    lex = lex * nep + (md - 2)
                gdof[e, i] = interior_off + e * nep**dim + lex
        # sanity: positive mapping Jacobian at the corners
        isoparametric_map(mesh, e, np.zeros((1, dim)))

    dmap = DofMap(
        mesh=mesh, element=element, gdof=gdof, gsign=gsign, n_modes=n_modes,
        interior_offset=interior_off, dirichlet=np.zeros((n_modes, dim), dtype=bool),
        free_map=np.arange(n_modes * dim), n_free=n_modes * dim,
    )
    if dirichlet:
        for tag, comps in dirichlet:
            dmap.apply_dirichlet(boundary_modes(mesh, element, tag), comps)
    return dmap


def boundary_modes(mesh: Mesh, element: TensorElement, tag: str) -> np.ndarray:
    """Global scalar modes supported on the faces of a boundary tag."""
    if tag not in mesh.boundary_sides:
        raise MeshError(f"unknown boundary tag {tag!r}")
    P = element.P
    nep = P - 1
    edge_off = mesh.n_vertices
    modes = set()
    for e, lf in mesh.boundary_sides[tag]:
        conn = mesh.elems[e]
        if mesh.dim == 3:
            axis, side, d1, d2, corners = FACE_TABLE[lf]
            vids = [corners[bb] for bb in ((0, 0), (1, 0), (1, 1), (0, 1))]
            for v in vids:
                modes.add(conn[v])
            for le, (eaxis, fixed, lo, hi) in enumerate(EDGE_TABLE[3]):
                if {lo, hi} <= set(vids):
                    ge = mesh.elem_edges[e, le]
                    modes.update(edge_off + ge * nep + j for j in range(nep))
            gf = mesh.elem_faces[e, lf]
            face_off = edge_off + mesh.n_edges * nep
            modes.update(gf * nep * nep + face_off + j for j in range(nep * nep))
        else:
            _, _, lo, hi = EDGE_TABLE[2][lf]
            modes.add(conn[lo])
            modes.add(conn[hi])
            ge = mesh.elem_edges[e, lf]
            modes.update(edge_off + ge * nep + j for j in range(nep))
    return np.array(sorted(modes), dtype=int)


def shared_face_mismatch(mesh: Mesh, element: TensorElement, dmap: DofMap,
                         coeffs: np.ndarray, npts: int = 5) -> float:
    """Largest interpolant mismatch across all shared faces/edges.

    ``coeffs`` is a per-mode scalar coefficient vector. Samples an
    npts x npts grid on each shared face (npts points per shared edge in
    2D), evaluates the field from both adjacent elements via the inverse
    map, and returns the max absolute difference. The decisive check of
    the orientation rules.
    """
    s = np.linspace(-0.95, 0.95, npts)
    worst = 0.0
    for (e1, lf1), (e2, lf2) in mesh.interior_faces():
        if mesh.dim == 3:
            axis, side, d1, d2, _ = FACE_TABLE[lf1]
            grid = np.array([(a, b) for a in s for b in s])
            xi1 = np.zeros((len(grid), 3))
            xi1[:, axis] = -1.0 if side == 0 else 1.0
            xi1[:, d1], xi1[:, d2] = grid[:, 0], grid[:, 1]
        else:
            eaxis, fixed, _, _ = EDGE_TABLE[2][lf1]
            xi1 = np.zeros((npts, 2))
            other = 1 - eaxis
            xi1[:, other] = -1.0 if fixed[0] == 0 else 1.0
            xi1[:, eaxis] = s
        x_phys, _, _ = isoparametric_map(mesh, e1, xi1)
        xi2 = np.array([inverse_map(mesh, e2, xp) for xp in x_phys])

        def field_at(e, xi):
            vals, _ = element.shape_eval(xi)
            c = coeffs[dmap.gdof[e]] * dmap.gsign[e]
            return vals @ c

        worst = max(worst, float(np.abs(field_at(e1, xi1) - field_at(e2, xi2)).max()))
    return worst
