import numpy as np
import pytest

from sdmefem.basis1d import BasisKind, build_basis
from sdmefem.meshdof import (Mesh, MeshError, build_dofmap, boundary_modes,
                             gen_box_mesh, gen_cube_mesh, gen_rect_mesh,
                             inverse_map, isoparametric_map, read_mesh,
                             shared_face_mismatch, write_mesh)
from sdmefem.tensorelem import TensorElement

KINDS = ["LagrangeGLL", "ModalJacobi", "SDME_M", "SDME_K", "SDME_H"]


def elem_of(dim, P, tag="ModalJacobi"):
    return TensorElement.create(dim, build_basis(P, BasisKind(tag)))


# ----------------------------------------------------------------------- mesh

def test_cube_counts():
    m = gen_cube_mesh(2)
    assert m.n_elems == 8 and m.n_vertices == 27
    m1 = gen_cube_mesh(1)
    assert m1.n_edges == 12 and m1.n_faces == 6
    assert gen_cube_mesh(3).n_elems == 27


def test_boundary_tags_resolve():
    m = gen_cube_mesh(2)
    for tag in ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax"):
        assert len(m.boundary_sides[tag]) == 4


def test_bad_boundary_tag_raises():
    coords = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                       [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float)
    elems = np.array([[0, 1, 2, 3, 4, 5, 6, 7]])
    with pytest.raises(MeshError):
        Mesh(3, coords, elems, {"bad": [(0, 1, 2, 4)]})


def test_mesh_file_roundtrip(tmp_path):
    m = gen_box_mesh((2, 1, 1), (2.0, 1.0, 1.0))
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    m2 = read_mesh(path)
    assert np.allclose(m2.coords, m.coords)
    assert np.array_equal(m2.elems, m.elems)
    assert m2.n_faces == m.n_faces
    assert set(m2.boundary_sides) == set(m.boundary_sides)


# ------------------------------------------------------------------- geometry

def test_isoparametric_unit_cube():
    m = gen_cube_mesh(1)
    x, jac, det = isoparametric_map(m, 0, np.zeros((1, 3)))
    assert det[0] == pytest.approx(0.125)
    assert np.allclose(x[0], [0.5, 0.5, 0.5])


def test_isoparametric_stretched():
    m = gen_box_mesh((1, 1, 1), (2.0, 1.0, 1.0))
    _, _, det = isoparametric_map(m, 0, np.zeros((1, 3)))
    assert det[0] == pytest.approx(0.25)


def test_inverse_map_roundtrip():
    m = gen_box_mesh((2, 2, 1), (1.0, 2.0, 0.5))
    rng = np.random.default_rng(0)
    xi = rng.uniform(-1, 1, (5, 3))
    x, _, _ = isoparametric_map(m, 3, xi)
    for i in range(5):
        assert np.allclose(inverse_map(m, 3, x[i]), xi[i], atol=1e-10)


def test_inverted_element_rejected():
    coords = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                       [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float)
    elems = np.array([[1, 0, 3, 2, 5, 4, 7, 6]])  # mirrored: negative Jacobian
    mesh = Mesh(3, coords, elems, {})
    with pytest.raises(MeshError):
        isoparametric_map(mesh, 0, np.zeros((1, 3)))


# ----------------------------------------------------------------- DOF counts

def test_free_dofs_match_reference_table():
    m = gen_cube_mesh(2)
    for P, expect in ((2, 300), (4, 1944), (6, 6084), (8, 13872)):
        dm = build_dofmap(m, elem_of(3, P), [("xmin", (0, 1, 2))])
        assert dm.n_free == expect


def test_scalar_mode_count_identity():
    m = gen_cube_mesh(2)
    for P in (2, 3, 4, 5):
        dm = build_dofmap(m, elem_of(3, P))
        expect = (m.n_vertices + m.n_edges * (P - 1) + m.n_faces * (P - 1) ** 2
                  + m.n_elems * (P - 1) ** 3)
        assert dm.n_modes == expect
        assert dm.n_free == 3 * expect


def test_single_hex_p1():
    dm = build_dofmap(gen_cube_mesh(1), elem_of(3, 1))
    assert dm.n_free == 24


def test_dirichlet_unknown_tag():
    m = gen_cube_mesh(1)
    with pytest.raises(MeshError):
        build_dofmap(m, elem_of(3, 2), [("nope", (0, 1, 2))])


def test_boundary_modes_counts():
    m = gen_cube_mesh(2)
    P = 3
    modes = boundary_modes(m, elem_of(3, P), "xmin")
    # face x=0: 9 vertices, 12 edges, 4 faces
    assert len(modes) == 9 + 12 * (P - 1) + 4 * (P - 1) ** 2


def test_partition_contiguity():
    m = gen_cube_mesh(2)
    dm = build_dofmap(m, elem_of(3, 3), [("xmin", (0, 1, 2))])
    boundary, groups = dm.boundary_internal_partition()
    assert np.array_equal(boundary, np.arange(len(boundary)))
    nxt = len(boundary)
    for g in groups:
        assert np.array_equal(g, np.arange(nxt, nxt + len(g)))
        nxt += len(g)
    assert nxt == dm.n_free


# ----------------------------------------------------------------- continuity

from tests_support_rotations import all_rotations, rotated_two_hex_mesh  # noqa: E402


@pytest.mark.parametrize("tag", KINDS)
def test_continuity_rotated_faces(tag):
    """Decisive check of the orientation sign/permutation rules."""
    rng = np.random.default_rng(11)
    elem = elem_of(3, 5, tag)
    for rot in all_rotations():
        mesh = rotated_two_hex_mesh(*rot)
        dm = build_dofmap(mesh, elem)
        coeffs = rng.standard_normal(dm.n_modes)
        assert shared_face_mismatch(mesh, elem, dm, coeffs) <= 1e-10


@pytest.mark.parametrize("tag", KINDS)
@pytest.mark.parametrize("P", [2, 4, 6])
def test_continuity_structured_cube(tag, P):
    rng = np.random.default_rng(13)
    elem = elem_of(3, P, tag)
    mesh = gen_cube_mesh(2)
    dm = build_dofmap(mesh, elem)
    coeffs = rng.standard_normal(dm.n_modes)
    assert shared_face_mismatch(mesh, elem, dm, coeffs) <= 1e-10


@pytest.mark.parametrize("tag", ["LagrangeGLL", "SDME_M"])
def test_continuity_2d(tag):
    rng = np.random.default_rng(17)
    elem = elem_of(2, 5, tag)
    mesh = gen_rect_mesh((2, 2), (1.0, 1.0))
    dm = build_dofmap(mesh, elem)
    coeffs = rng.standard_normal(dm.n_modes)
    assert shared_face_mismatch(mesh, elem, dm, coeffs) <= 1e-10


def test_nonsymmetric_weights_flip_raises():
    elem = TensorElement.create(
        3, build_basis(3, BasisKind("ModalJacobi", jacobi_alpha=0.0, jacobi_beta=1.0)))
    # a rotation that reverses a shared-face axis
    mesh = rotated_two_hex_mesh((0, 1, 2), (1, -1, -1))
    with pytest.raises(MeshError):
        build_dofmap(mesh, elem)
