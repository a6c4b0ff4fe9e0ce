"""Gauss-Legendre and Gauss-Lobatto-Legendre rules on [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi

__all__ = ["QuadratureRule", "gauss_rule", "gll_rule"]


@dataclass(frozen=True)
class QuadratureRule:
    """Points (ascending, in [-1, 1]) and positive weights of a 1D rule."""

    kind: str  # "GaussLegendre" or "GaussLobattoLegendre"
    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.points)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1."""
    if n < 1:
        raise ValueError(f"Gauss-Legendre rule needs n >= 1, got {n}")
    x, w = npleg.leggauss(n)
    return QuadratureRule("GaussLegendre", x, w)


@lru_cache(maxsize=None)
def gll_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Lobatto-Legendre rule (includes the endpoints).

    Interior points are the roots of P'_{n-1}; the rule is exact for
    polynomials of degree 2n-3.
    """
    if n < 2:
        raise ValueError(f"Gauss-Lobatto-Legendre rule needs n >= 2, got {n}")
    if n == 2:
        x = np.array([-1.0, 1.0])
    else:
        # P'_{n-1} is proportional to the Jacobi polynomial J^{1,1}_{n-2}.
        xi, _ = roots_jacobi(n - 2, 1.0, 1.0)
        x = np.concatenate(([-1.0], np.sort(xi), [1.0]))
    # w_i = 2 / (n (n-1) P_{n-1}(x_i)^2)
    pn1 = npleg.legval(x, [0.0] * (n - 1) + [1.0])
    w = 2.0 / (n * (n - 1) * pn1**2)
    return QuadratureRule("GaussLobattoLegendre", x, w)
