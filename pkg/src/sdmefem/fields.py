"""Closed-form displacement fields for manufactured-solution runs.

Each field provides displacement, velocity, acceleration and the exact
displacement gradient. The gradient is analytic so that only the stress
divergence (one differentiation level) is left to finite differences when
fabricating body forces; nesting two finite-difference levels would put
noise well above the spectral error floors the convergence studies target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["AnalyticField", "FIELD_REGISTRY", "get_field"]


@dataclass(frozen=True)
class AnalyticField:
    """Displacement u(X, t) with exact time derivatives and gradient.

    All callables take points of shape (n, 3) plus the time and return
    (n, 3) arrays (the gradient returns (n, 3, 3) with G[i, c, d] =
    du_c/dX_d).
    """

    name: str
    u: Callable
    v: Callable
    a: Callable
    grad: Callable


def _only_x(fn):
    def wrapped(x, t):
        out = np.zeros((len(x), 3))
        out[:, 0] = fn(x[:, 0], t)
        return out

    return wrapped


def _only_x_grad(fn):
    def wrapped(x, t):
        out = np.zeros((len(x), 3, 3))
        out[:, 0, 0] = fn(x[:, 0], t)
        return out

    return wrapped


def _zero(x, t):
    return np.zeros((len(x), 3))


_static_sine = AnalyticField(
    "static-sine",
    u=_only_x(lambda X, t: 1.9 * np.sin(X) - X),
    v=_zero,
    a=_zero,
    grad=_only_x_grad(lambda X, t: 1.9 * np.cos(X) - 1.0),
)

_sine_wave = AnalyticField(
    "sine-wave",
    u=_only_x(lambda X, t: np.sin(0.5 * np.pi * X) * np.sin(2.0 * np.pi * t)),
    v=_only_x(lambda X, t: 2.0 * np.pi * np.sin(0.5 * np.pi * X) * np.cos(2.0 * np.pi * t)),
    a=_only_x(lambda X, t: -4.0 * np.pi**2 * np.sin(0.5 * np.pi * X) * np.sin(2.0 * np.pi * t)),
    grad=_only_x_grad(lambda X, t: 0.5 * np.pi * np.cos(0.5 * np.pi * X) * np.sin(2.0 * np.pi * t)),
)

_quartic_wave = AnalyticField(
    "quartic-wave",
    u=_only_x(lambda X, t: X**4 * np.sin(2.0 * np.pi * t)),
    v=_only_x(lambda X, t: 2.0 * np.pi * X**4 * np.cos(2.0 * np.pi * t)),
    a=_only_x(lambda X, t: -4.0 * np.pi**2 * X**4 * np.sin(2.0 * np.pi * t)),
    grad=_only_x_grad(lambda X, t: 4.0 * X**3 * np.sin(2.0 * np.pi * t)),
)

_zero_field = AnalyticField("zero", u=_zero, v=_zero, a=_zero,
                            grad=lambda x, t: np.zeros((len(x), 3, 3)))

FIELD_REGISTRY = {
    f.name: f for f in (_static_sine, _sine_wave, _quartic_wave, _zero_field)
}


def get_field(name: str) -> AnalyticField:
    try:
        return FIELD_REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown analytic field {name!r}; available: {sorted(FIELD_REGISTRY)}"
        ) from None
