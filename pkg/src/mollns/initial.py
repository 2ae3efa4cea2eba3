"""Named initial-condition generators.

Every generator returns a divergence-free, zero-mean velocity field.  The
registry keys are the names accepted in run configurations.
"""

from __future__ import annotations

import math

import numpy as np

from mollns.spectral import (
    GridSpec,
    SpectralField,
    forward_transform,
    leray_project,
    norm_l2,
)


def taylor_green_2d(grid: GridSpec, amplitude: float = 1.0) -> SpectralField:
    """``amplitude * (sin x cos y, -cos x sin y)``."""
    if grid.dim != 2:
        raise ValueError("taylor-green-2d needs a 2D grid")
    x, y = grid.points()
    u = np.array([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    return forward_transform(amplitude * u, grid)


def abc_flow_3d(grid: GridSpec, a: float = 1.0, b: float = 1.0, c: float = 1.0) -> SpectralField:
    """Arnold-Beltrami-Childress flow; curl v = v, so its advection is a gradient."""
    if grid.dim != 3:
        raise ValueError("abc-flow-3d needs a 3D grid")
    x, y, z = grid.points()
    u = np.array(
        [
            a * np.sin(z) + c * np.cos(y),
            b * np.sin(x) + a * np.cos(z),
            c * np.sin(y) + b * np.cos(x),
        ]
    )
    return forward_transform(u, grid)


def random_bandlimited(
    grid: GridSpec,
    seed: int = 0,
    band: tuple[float, float] = (1.0, 1.5),
    norm: float = 1.0,
    slope: float = 0.0,
) -> SpectralField:
    """Random solenoidal field supported on ``band[0] <= |k| <= band[1]``.

    Phases and polarisations are Gaussian random; the energy of every shell
    ``|k|^2 = const`` is then rescaled to follow ``|k|**(-slope)`` exactly, so
    the spectrum (and with it the enstrophy ratios) does not depend on the
    seed.  The result is scaled so that ``||v||_2 == norm``.
    """
    kmin, kmax = band
    if not 0 < kmin <= kmax:
        raise ValueError(f"invalid spectral band {band}")
    rng = np.random.default_rng(seed)
    shape = (grid.dim,) + grid.shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kabs = grid.k_abs
    inside = (kabs >= kmin) & (kabs <= kmax) & (np.abs(grid.k_int) < grid.n // 2).all(axis=0)
    # symmetrise: keep the real part of the physical field
    axes = tuple(range(1, grid.dim + 1))
    phys = np.real(np.fft.ifftn(raw * inside, axes=axes))
    c = np.array(leray_project(forward_transform(phys, grid)).coeffs)
    shell = np.rint(np.sum(grid.k_int**2, axis=0)).astype(int)
    power = np.sum(np.abs(c) ** 2, axis=0)
    for s2 in np.unique(shell[inside]):
        sel = inside & (shell == s2)
        e = power[sel].sum()
        if e > 0:
            c[:, sel] *= math.sqrt(float(s2) ** (-slope / 2.0) / e)
    u = SpectralField(grid, c)
    size = norm_l2(u)
    if size == 0.0:
        raise ValueError(f"spectral band {band} contains no resolved modes")
    return u * (norm / size)


def zero(grid: GridSpec) -> SpectralField:
    return SpectralField.zeros(grid)


GENERATORS = {
    "taylor-green-2d": taylor_green_2d,
    "abc-flow-3d": abc_flow_3d,
    "random-bandlimited": random_bandlimited,
    "zero": zero,
}


def build_initial(grid: GridSpec, name: str, params: dict | None = None) -> SpectralField:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown initial condition {name!r}; choose from {sorted(GENERATORS)}") from None
    params = dict(params or {})
    if "band" in params:
        params["band"] = tuple(params["band"])
    u = gen(grid, **params)
    # zero-mean gauge
    c = np.array(u.coeffs)
    c[(slice(None),) + (0,) * grid.dim] = 0.0
    return u.replace(c)


def taylor_green_energy(amplitude: float = 1.0) -> float:
    """``||v||_2^2`` of the 2D Taylor-Green field: ``2 * pi^2 * amplitude^2``."""
    return 2.0 * math.pi**2 * amplitude**2
