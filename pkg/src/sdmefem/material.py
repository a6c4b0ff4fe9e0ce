"""Compressible neo-Hookean constitutive model.

Strain energy psi = mu/2 (tr C - 3) - mu ln J + lambda/2 (ln J)^2 with the
second Piola-Kirchhoff stress S = mu (I - C^-1) + lambda ln J C^-1 and its
closed-form tangent dS/dE. All stress routines are batched over leading
axes so element kernels can evaluate every quadrature point at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NeoHookean",
    "lame_from_engineering",
    "pk2_stress",
    "material_tangent",
    "VOIGT_PAIRS",
]

# Symmetric-pair ordering used for all 6x6 tangents: (11, 22, 33, 12, 23, 13),
# with engineering (factor-2) shear strain on the strain side.
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))


class InvalidDeformationError(ValueError):
    """Raised when det C <= 0, i.e. the deformation state is inadmissible."""


@dataclass(frozen=True)
class NeoHookean:
    """Lame parameters (Pa) and reference density (kg/m^3)."""

    mu: float
    lambda_lame: float
    rho0: float = 1.0

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"shear modulus must be positive, got {self.mu}")
        if self.rho0 <= 0.0:
            raise ValueError(f"reference density must be positive, got {self.rho0}")
        if self.lambda_lame + 2.0 * self.mu / 3.0 <= 0.0:
            raise ValueError("bulk modulus must be positive")

    @classmethod
    def from_engineering(cls, E: float, nu: float, rho0: float = 1.0) -> "NeoHookean":
        mu, lam = lame_from_engineering(E, nu)
        return cls(mu, lam, rho0)


def lame_from_engineering(E: float, nu: float) -> tuple[float, float]:
    """Convert Young's modulus / Poisson ratio to the Lame parameters."""
    if E <= 0.0:
        raise ValueError(f"Young's modulus must be positive, got {E}")
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam


def pk2_stress(mat: NeoHookean, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Second PK stress and strain energy density from right Cauchy-Green C.

    Accepts a single 3x3 tensor or a batch (..., 3, 3); returns (S, psi)
    with matching batch shape.
    """
    c = np.asarray(c, dtype=float)
    det_c = np.linalg.det(c)
    if np.any(det_c <= 0.0):
        raise InvalidDeformationError("det C <= 0 at some evaluation point")
    c_inv = np.linalg.inv(c)
    ln_j = 0.5 * np.log(det_c)
    eye = np.broadcast_to(np.eye(3), c.shape)
    s = mat.mu * (eye - c_inv) + mat.lambda_lame * ln_j[..., None, None] * c_inv
    tr_c = np.trace(c, axis1=-2, axis2=-1)
    psi = 0.5 * mat.mu * (tr_c - 3.0) - mat.mu * ln_j + 0.5 * mat.lambda_lame * ln_j**2
    return s, psi


def material_tangent(mat: NeoHookean, c: np.ndarray) -> np.ndarray:
    """dS/dE as a 6x6 matrix in the VOIGT_PAIRS ordering (batched).

    Closed form lambda C^-1 (x) C^-1 + 2 (mu - lambda ln J) II_{C^-1} where
    (II_A)_{ijkl} = (A_ik A_jl + A_il A_jk) / 2. Entries are the raw tensor
    components; contracting with engineering shear strain reproduces dS.
    """
    c = np.asarray(c, dtype=float)
    det_c = np.linalg.det(c)
    if np.any(det_c <= 0.0):
        raise InvalidDeformationError("det C <= 0 at some evaluation point")
    ci = np.linalg.inv(c)
    ln_j = 0.5 * np.log(det_c)
    coef = 2.0 * (mat.mu - mat.lambda_lame * ln_j)
    batch = c.shape[:-2]
    d = np.empty(batch + (6, 6))
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            d[..., a, b] = mat.lambda_lame * ci[..., i, j] * ci[..., k, l] + 0.5 * coef * (
                ci[..., i, k] * ci[..., j, l] + ci[..., i, l] * ci[..., j, k]
            )
    return d
