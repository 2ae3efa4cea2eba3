"""Slow, independent reference implementations.

Nothing here is used by the production paths (solver, diagnostics, sweeps);
the functions exist to cross-check them in tests and in ``mollns validate``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from mollns.spectral import GridSpec, SpectralField

MAX_DIRECT_OPS = 10**9


@dataclass(frozen=True)
class OracleConfig:
    max_n_2d: int = 16
    max_n_3d: int = 8
    refine: int = 4

    def __post_init__(self):
        for d, n in ((2, self.max_n_2d), (3, self.max_n_3d)):
            if n ** (2 * d) > MAX_DIRECT_OPS:
                raise ValueError(f"brute-force limit N={n} in {d}D exceeds the cost guard")
        if self.refine < 1:
            raise ValueError("refinement factor must be >= 1")

    def max_n(self, dim: int) -> int:
        return self.max_n_2d if dim == 2 else self.max_n_3d


DEFAULT = OracleConfig()


def taylor_green_samples(grid: GridSpec, t: float = 0.0, viscosity: float = 1.0, refine: int = 1) -> np.ndarray:
    if grid.dim != 2:
        raise ValueError("the Taylor-Green oracle is two-dimensional")
    x, y = grid.points(refine)
    decay = math.exp(-2.0 * viscosity * t)
    return decay * np.array([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])


def taylor_green(grid: GridSpec, t: float = 0.0, viscosity: float = 1.0) -> SpectralField:
    """Exact decaying vortex, coefficients written down from the product formulas.

    ``sin x cos y`` has coefficient ``-i s/4`` at ``(s, r)`` for ``s, r = +-1``,
    and ``-cos x sin y`` has ``i r/4``.
    """
    if grid.dim != 2:
        raise ValueError("the Taylor-Green oracle is two-dimensional")
    decay = math.exp(-2.0 * viscosity * t)
    c = np.zeros((2,) + grid.shape, dtype=complex)
    for s in (1, -1):
        for r in (1, -1):
            c[0, s % grid.n, r % grid.n] = -0.25j * s * decay
            c[1, s % grid.n, r % grid.n] = 0.25j * r * decay
    return SpectralField(grid, c)


def taylor_green_pressure_samples(grid: GridSpec, t: float = 0.0, viscosity: float = 1.0) -> np.ndarray:
    x, y = grid.points()
    return math.exp(-4.0 * viscosity * t) * (np.cos(2 * x) + np.cos(2 * y)) / 4.0


def _guard(n: int, dim: int, config: OracleConfig):
    if n ** (2 * dim) > MAX_DIRECT_OPS or n > config.max_n(dim):
        raise ValueError(
            f"brute-force transform at N={n} in {dim}D exceeds the oracle limit "
            f"(N <= {config.max_n(dim)}, N^(2d) <= {MAX_DIRECT_OPS:g})"
        )


def _phase_matrix(n: int, dim: int, sign: float) -> np.ndarray:
    idx = np.indices((n,) * dim).reshape(dim, -1)
    k = np.where(idx > n // 2, idx - n, idx)
    x = idx * (2.0 * math.pi / n)
    return np.exp(sign * 1j * (k.T @ x))


def dft_bruteforce(samples: np.ndarray, config: OracleConfig = DEFAULT) -> np.ndarray:
    """Direct Fourier sum ``c(k) = N^-d sum_x f(x) exp(-i k.x)``.

    ``samples`` has shape ``(ncomp, N, ..., N)``.
    """
    arr = np.asarray(samples)
    dim = arr.ndim - 1
    n = arr.shape[1]
    _guard(n, dim, config)
    W = _phase_matrix(n, dim, -1.0)
    flat = arr.reshape(arr.shape[0], -1)
    return ((flat @ W.T) / n**dim).reshape(arr.shape)


def idft_bruteforce(coeffs: np.ndarray, config: OracleConfig = DEFAULT) -> np.ndarray:
    """Direct synthesis ``f(x) = sum_k c(k) exp(i k.x)`` (real part)."""
    c = np.asarray(coeffs)
    dim = c.ndim - 1
    n = c.shape[1]
    _guard(n, dim, config)
    W = _phase_matrix(n, dim, 1.0)
    flat = c.reshape(c.shape[0], -1)
    return np.real(flat @ W).reshape(c.shape)


def quadrature_refine(integrand: Callable[[np.ndarray], np.ndarray], s: float, t: float, samples: int, factor: int = 4) -> float:
    """Composite trapezoid of ``integrand`` on ``factor`` times the base sampling of ``[s, t]``."""
    if samples < 2:
        raise ValueError("need at least two base samples")
    tau = np.linspace(s, t, (samples - 1) * factor + 1)
    return float(np.trapezoid(integrand(tau), tau))


def fd_time_derivative(values: np.ndarray, times: np.ndarray, j: int) -> float:
    """Centered difference ``(x[j+1] - x[j-1]) / (t[j+1] - t[j-1])``."""
    if j <= 0 or j >= len(values) - 1:
        raise IndexError(f"centered difference needs an interior index, got {j} of {len(values)}")
    return float((values[j + 1] - values[j - 1]) / (times[j + 1] - times[j - 1]))


def symbol_reference(rho: float, profile: str = "smooth-step") -> float:
    """Scalar evaluation of the mollifier profile, written out independently."""
    if rho <= 0.5:
        return 1.0
    if rho >= 1.0:
        return 0.0
    s = 2.0 * rho - 1.0
    if profile == "exp-step":
        return math.exp(1.0 - 1.0 / (1.0 - s * s))
    a, b = math.exp(-1.0 / (1.0 - s)), math.exp(-1.0 / s)
    return a / (a + b)


def leray_bruteforce(samples: np.ndarray, config: OracleConfig = DEFAULT) -> np.ndarray:
    """Projector applied mode by mode with an explicit loop, on brute-force coefficients."""
    c = dft_bruteforce(samples, config)
    n = c.shape[1]
    out = c.copy()
    for idx in np.ndindex(*c.shape[1:]):
        k = np.array([i - n if i > n // 2 else i for i in idx], dtype=float)
        k[np.abs(k) == n // 2] = 0.0
        k2 = float(k @ k)
        if k2 == 0:
            continue
        u = c[(slice(None),) + idx]
        out[(slice(None),) + idx] = u - k * (k @ u) / k2
    return out
