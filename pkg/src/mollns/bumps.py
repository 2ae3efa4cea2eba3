"""Smooth non-negative periodic space-time cutoffs for the localized balance.

Each bump returns its value together with the analytic time derivative,
spatial gradient and Laplacian, so no cutoff is ever differentiated
numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mollns.spectral import GridSpec


@dataclass(frozen=True)
class BumpValues:
    phi: np.ndarray
    phi_t: np.ndarray
    grad: np.ndarray
    lap: np.ndarray


@dataclass(frozen=True)
class ConstantBump:
    value: float = 1.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("cutoff must be non-negative")

    def evaluate(self, grid: GridSpec, t: float, refine: float = 1.0) -> BumpValues:
        x = grid.points(refine)
        phi = np.full(x.shape[1:], self.value)
        zero = np.zeros_like(phi)
        return BumpValues(phi, zero, np.zeros_like(x), zero)


@dataclass(frozen=True)
class VonMisesBump:
    """``exp(-rate*t) * prod_i exp(kappa * (cos(x_i - c_i) - 1))``.

    A periodic Gaussian-profile bump of width ~ ``1/sqrt(kappa)`` centred at
    ``center``.
    """

    kappa: float = 2.0
    center: tuple = (math.pi, math.pi, math.pi)
    rate: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    def evaluate(self, grid: GridSpec, t: float, refine: float = 1.0) -> BumpValues:
        x = grid.points(refine)
        c = np.asarray(self.center[: grid.dim], dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
        d = x - c
        theta = math.exp(-self.rate * t)
        phi = theta * np.exp(self.kappa * np.sum(np.cos(d) - 1.0, axis=0))
        grad = -self.kappa * np.sin(d) * phi
        lap = np.sum(self.kappa**2 * np.sin(d) ** 2 - self.kappa * np.cos(d), axis=0) * phi
        return BumpValues(phi, -self.rate * phi, grad, lap)


BUMPS = {"constant": ConstantBump, "von-mises": VonMisesBump}


def make_bump(spec: dict | None):
    spec = dict(spec or {"name": "constant"})
    name = spec.pop("name")
    params = spec.pop("params", spec)
    if "center" in params:
        params["center"] = tuple(params["center"])
    try:
        return BUMPS[name](**params)
    except KeyError:
        raise ValueError(f"unknown cutoff {name!r}; choose from {sorted(BUMPS)}") from None
