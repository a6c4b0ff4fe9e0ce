import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdmefem.material import (NeoHookean, VOIGT_PAIRS, lame_from_engineering,
                              material_tangent, pk2_stress)

MAT = NeoHookean.from_engineering(1000.0, 0.3, 1.0)


def random_admissible_c(rng, lo=0.5, hi=2.0):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    return (q * rng.uniform(lo, hi, 3)) @ q.T


def test_lame_conversion():
    mu, lam = lame_from_engineering(1000.0, 0.3)
    assert mu == pytest.approx(384.6154, abs=1e-4)
    assert lam == pytest.approx(576.9231, abs=1e-4)
    mu0, lam0 = lame_from_engineering(800.0, 0.0)
    assert lam0 == 0.0 and mu0 == 400.0
    assert lame_from_engineering(500.0, 0.3)[0] == pytest.approx(192.3077, abs=1e-4)


def test_lame_rejects_incompressible():
    with pytest.raises(ValueError):
        lame_from_engineering(1000.0, 0.5)


def test_reference_state():
    s, psi = pk2_stress(MAT, np.eye(3))
    assert np.abs(s).max() <= 1e-14
    assert psi == pytest.approx(0.0, abs=1e-14)


def test_rotation_gives_zero_stress():
    th = 0.3
    r = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1]])
    c = r.T @ r
    s, psi = pk2_stress(MAT, c)
    assert np.abs(s).max() <= 1e-12
    assert abs(psi) <= 1e-13


def test_invalid_state_rejected():
    with pytest.raises(ValueError):
        pk2_stress(MAT, -np.eye(3))


def _dpsi_de_fd(mat, c, i, j, h=1e-6):
    """Central difference of psi along the symmetric perturbation that
    changes the engineering strain component (i, j) at unit rate.

    dc adds h at (i, j) and (j, i) (the diagonal therefore moves by 2h);
    with Psi'(C) = S/2 the derivative equals S_ij for every pair.
    """
    dc = np.zeros((3, 3))
    dc[i, j] += h
    dc[j, i] += h
    _, pp = pk2_stress(mat, c + dc)
    _, pm = pk2_stress(mat, c - dc)
    return (pp - pm) / (2.0 * h)


def test_stress_is_energy_gradient_uniaxial():
    f = np.diag([1.1, 1.0, 1.0])
    c = f.T @ f
    s, _ = pk2_stress(MAT, c)
    for i in range(3):
        for j in range(i, 3):
            fd = _dpsi_de_fd(MAT, c, i, j)
            assert fd == pytest.approx(s[i, j], rel=1e-6, abs=1e-8)


def test_stress_is_energy_gradient_random():
    rng = np.random.default_rng(8)
    for _ in range(100):
        c = random_admissible_c(rng)
        s, _ = pk2_stress(MAT, c)
        scale = np.abs(s).max()
        for i in range(3):
            for j in range(i, 3):
                fd = _dpsi_de_fd(MAT, c, i, j)
                assert abs(fd - s[i, j]) <= 1e-6 * max(scale, 1.0)


def test_tangent_matches_fd():
    rng = np.random.default_rng(9)
    for _ in range(25):
        c = random_admissible_c(rng, 0.8, 1.3)
        d = material_tangent(MAT, c)
        scale = np.abs(d).max()
        h = 1e-6
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            dc = np.zeros((3, 3))
            dc[k, l] += h
            dc[l, k] += h
            sp, _ = pk2_stress(MAT, c + dc)
            sm, _ = pk2_stress(MAT, c - dc)
            ds = (sp - sm) / (2 * h)  # dS per unit engineering strain of (k, l)
            for a, (i, j) in enumerate(VOIGT_PAIRS):
                assert abs(ds[i, j] - d[a, b]) <= 1e-6 * scale


def test_tangent_symmetries():
    rng = np.random.default_rng(10)
    c = random_admissible_c(rng)
    d = material_tangent(MAT, c)
    assert np.abs(d - d.T).max() <= 1e-12 * np.abs(d).max()


def test_tangent_at_identity_small_strain():
    d = material_tangent(MAT, np.eye(3))
    mu, lam = MAT.mu, MAT.lambda_lame
    expect = np.zeros((6, 6))
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            expect[a, b] = lam * (i == j) * (k == l) + mu * (
                (i == k) * (j == l) + (i == l) * (j == k))
    assert np.allclose(d, expect, atol=1e-12)


def test_energy_nonnegative_near_reference():
    rng = np.random.default_rng(11)
    for _ in range(200):
        c = random_admissible_c(rng, 0.9, 1.1)
        _, psi = pk2_stress(MAT, c)
        assert psi >= -1e-13


def test_batched_matches_loop():
    rng = np.random.default_rng(12)
    cs = np.stack([random_admissible_c(rng) for _ in range(6)])
    s_b, psi_b = pk2_stress(MAT, cs)
    d_b = material_tangent(MAT, cs)
    for i in range(6):
        s_i, psi_i = pk2_stress(MAT, cs[i])
        assert np.allclose(s_b[i], s_i)
        assert psi_b[i] == pytest.approx(psi_i)
        assert np.allclose(d_b[i], material_tangent(MAT, cs[i]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hyperelastic_consistency_property(seed):
    rng = np.random.default_rng(seed)
    c = random_admissible_c(rng)
    s, _ = pk2_stress(MAT, c)
    i, j = rng.integers(0, 3), rng.integers(0, 3)
    i, j = min(i, j), max(i, j)
    fd = _dpsi_de_fd(MAT, c, i, j)
    assert abs(fd - s[i, j]) <= 1e-6 * max(np.abs(s).max(), 1.0)


def test_material_validation():
    with pytest.raises(ValueError):
        NeoHookean(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        NeoHookean(1.0, 1.0, -2.0)
