import numpy as np
import pytest

from sdmefem.quadrature import gauss_rule, gll_rule


def analytic_monomial(m: int) -> float:
    return 0.0 if m % 2 else 2.0 / (m + 1)


def test_gauss_n1():
    r = gauss_rule(1)
    assert np.allclose(r.points, [0.0])
    assert np.allclose(r.weights, [2.0])


def test_gauss_n2():
    r = gauss_rule(2)
    assert np.allclose(r.points, [-1 / np.sqrt(3), 1 / np.sqrt(3)])
    assert np.allclose(r.weights, [1.0, 1.0])


def test_gauss_monomial_oracle():
    r = gauss_rule(5)
    assert r.integrate(r.points**8) == pytest.approx(2.0 / 9.0, abs=1e-13)


def test_gauss_rejects_zero():
    with pytest.raises(ValueError):
        gauss_rule(0)


def test_gll_n2():
    r = gll_rule(2)
    assert np.allclose(r.points, [-1.0, 1.0])
    assert np.allclose(r.weights, [1.0, 1.0])


def test_gll_n3():
    r = gll_rule(3)
    assert np.allclose(r.points, [-1.0, 0.0, 1.0])
    assert np.allclose(r.weights, [1 / 3, 4 / 3, 1 / 3])


def test_gll_n5_interior():
    r = gll_rule(5)
    assert r.points[1] == pytest.approx(-np.sqrt(3 / 7), abs=1e-12)
    assert r.points[2] == pytest.approx(0.0, abs=1e-14)
    assert r.points[3] == pytest.approx(np.sqrt(3 / 7), abs=1e-12)


def test_gll_rejects_small():
    with pytest.raises(ValueError):
        gll_rule(1)


@pytest.mark.parametrize("n", range(1, 17))
def test_gauss_exactness_and_failure(n):
    r = gauss_rule(n)
    deg = 2 * n - 1
    for m in range(deg + 1):
        assert r.integrate(r.points**m) == pytest.approx(analytic_monomial(m), abs=1e-12)
    # one degree above the rule must fail; the Gauss error constant of the
    # first inexact monomial decays below 1e-6 relative past n = 12
    if n <= 12:
        exact = analytic_monomial(deg + 1)
        got = r.integrate(r.points ** (deg + 1))
        assert abs(got - exact) > 1e-6 * abs(exact)


@pytest.mark.parametrize("n", range(2, 17))
def test_gll_exactness_and_failure(n):
    r = gll_rule(n)
    deg = 2 * n - 3
    for m in range(deg + 1):
        assert r.integrate(r.points**m) == pytest.approx(analytic_monomial(m), abs=1e-12)
    if n <= 13:
        exact = analytic_monomial(deg + 1)
        got = r.integrate(r.points ** (deg + 1))
        assert abs(got - exact) > 1e-6 * abs(exact)


@pytest.mark.parametrize("make,n", [(gauss_rule, 7), (gauss_rule, 12), (gll_rule, 7), (gll_rule, 12)])
def test_symmetry_and_weight_sum(make, n):
    r = make(n)
    assert np.abs(r.points + r.points[::-1]).max() <= 1e-13
    assert np.abs(r.weights - r.weights[::-1]).max() <= 1e-13
    assert r.weights.sum() == pytest.approx(2.0, abs=1e-13)
    assert np.all(np.diff(r.points) > 0)
    assert np.all(r.weights > 0)


def test_gll_includes_endpoints():
    for n in (2, 5, 9):
        r = gll_rule(n)
        assert r.points[0] == -1.0 and r.points[-1] == 1.0
