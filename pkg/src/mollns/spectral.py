"""Fourier representation of vector fields on the periodic torus [0, 2*pi)^d.

Coefficients are normalised so that a physical sample ``cos(x1)`` has the
value 1/2 at ``k = (+-1, 0, ...)``; the L2 norm over the torus is therefore

    ||u||_2^2 = (2*pi)^d * sum_k |u_hat(k)|^2 .

First-derivative symbols drop the Nyquist wavenumber (its sign is ambiguous
on an even grid) and every operator built on derivatives uses the same
convention, so the discrete identities (Parseval, integration by parts,
orthogonality of the Leray projector) hold to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi

#: refinement of the physical grid used for non-quadratic norms
NORM_REFINE = 1.5


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``n`` points per axis on the ``dim``-torus."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dim}")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"resolution must be an even integer >= 4, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def volume(self) -> float:
        return TWO_PI**self.dim

    @cached_property
    def k_int(self) -> np.ndarray:
        """Integer wavevectors, shape ``(dim, n, ..., n)``; Nyquist is ``-n/2``."""
        k1 = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.array(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def k(self) -> np.ndarray:
        """Derivative wavevectors (Nyquist component set to zero)."""
        k = self.k_int.copy()
        k[k == -self.n // 2] = 0.0
        return k

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k**2, axis=0)

    @cached_property
    def k_abs(self) -> np.ndarray:
        """Euclidean length of the integer wavevector (used by filters)."""
        return np.sqrt(np.sum(self.k_int**2, axis=0))

    @cached_property
    def inv_k2(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            inv = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        return inv

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with ``3*|k_i| < n`` on every axis."""
        return np.all(3.0 * np.abs(self.k_int) < self.n, axis=0)

    def points(self, refine: float = 1.0) -> np.ndarray:
        """Physical coordinates, shape ``(dim, M, ..., M)``."""
        m = refined_size(self.n, refine)
        x1 = TWO_PI * np.arange(m) / m
        return np.array(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "n": self.n}


def refined_size(n: int, refine: float) -> int:
    m = int(round(n * refine))
    if m < n:
        raise ValueError("refinement factor must be >= 1")
    return m


@dataclass(frozen=True)
class SpectralField:
    """Real field stored by its Fourier coefficients.

    ``coeffs`` has shape ``(ncomp, n, ..., n)``; a scalar field has one
    component.  The array is copied and frozen on construction.
    """

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.ndim == self.grid.dim:
            c = c[np.newaxis]
        if c.shape[1:] != self.grid.shape:
            raise ValueError(
                f"coefficient shape {c.shape[1:]} does not match grid {self.grid.shape}"
            )
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: GridSpec, ncomp: int | None = None) -> "SpectralField":
        ncomp = grid.dim if ncomp is None else ncomp
        return cls(grid, np.zeros((ncomp,) + grid.shape, dtype=np.complex128))

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.ncomp == self.grid.dim

    def replace(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return self.replace(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return self.replace(self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return self.replace(-self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.replace(self.coeffs * scalar)

    __rmul__ = __mul__

    def hermitian_defect(self) -> float:
        """Max ``|c(-k) - conj(c(k))|`` relative to the largest coefficient."""
        c = self.coeffs
        flipped = np.conj(np.roll(np.flip(c, axis=tuple(range(1, c.ndim))), 1, axis=tuple(range(1, c.ndim))))
        scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
        return float(np.max(np.abs(c - flipped)) / scale)

    def divergence_defect(self) -> float:
        """Max over modes of ``|k . u(k)| / |u(k)|`` (0 for an empty field)."""
        if not self.is_vector:
            raise ValueError("divergence is defined for vector fields only")
        kdotu = np.abs(np.einsum("i...,i...->...", self.grid.k, self.coeffs))
        amp = np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0)) * np.sqrt(self.grid.k2)
        nz = amp > 0
        if not np.any(nz):
            return 0.0
        return float(np.max(kdotu[nz] / amp[nz]))


def _check_same_grid(a: SpectralField, b: SpectralField):
    if a.grid != b.grid or a.ncomp != b.ncomp:
        raise ValueError("fields live on different grids or have different ranks")


@dataclass(frozen=True)
class MollifierSpec:
    """Spectral low-pass filter ``chi(|k| / m)``.

    ``chi`` is 1 on ``rho <= 1/2``, 0 on ``rho >= 1`` and non-increasing in
    between.  ``"smooth-step"`` is C-infinity at both ends; ``"exp-step"``
    is ``exp(1 - 1/(1 - s^2))`` with ``s = 2*rho - 1`` (C^1 at ``rho = 1/2``).
    """

    m: float
    profile: str = "smooth-step"

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ValueError(f"mollification index must be positive and finite, got {self.m}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown mollifier profile {self.profile!r}")

    def chi(self, rho) -> np.ndarray:
        return PROFILES[self.profile](np.asarray(rho, dtype=float))

    def symbol(self, grid: GridSpec) -> np.ndarray:
        return self.chi(grid.k_abs / self.m)

    def to_dict(self) -> dict:
        return {"m": self.m, "profile": self.profile}


def _psi(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _smooth_step(rho: np.ndarray) -> np.ndarray:
    s = np.clip(2.0 * rho - 1.0, 0.0, 1.0)
    a, b = _psi(1.0 - s), _psi(s)
    return a / (a + b)


def _exp_step(rho: np.ndarray) -> np.ndarray:
    s = np.clip(2.0 * rho - 1.0, 0.0, 1.0)
    out = np.zeros_like(s)
    inner = s < 1.0
    out[inner] = np.exp(1.0 - 1.0 / (1.0 - s[inner] ** 2))
    return out


PROFILES = {"smooth-step": _smooth_step, "exp-step": _exp_step}


# ---------------------------------------------------------------- transforms


def forward_transform(samples: np.ndarray, grid: GridSpec) -> SpectralField:
    """Physical samples (``grid.shape`` or ``(ncomp,) + grid.shape``) to coefficients."""
    samples = np.asarray(samples)
    if not np.isrealobj(samples):
        raise ValueError("samples must be real-valued")
    if samples.ndim == grid.dim:
        samples = samples[np.newaxis]
    if samples.shape[1:] != grid.shape:
        raise ValueError(f"sample shape {samples.shape[1:]} does not match grid {grid.shape}")
    axes = tuple(range(1, grid.dim + 1))
    return SpectralField(grid, np.fft.fftn(samples, axes=axes) / grid.n**grid.dim)


def inverse_transform(u: SpectralField, refine: float = 1.0) -> np.ndarray:
    """Real samples of ``u`` on the (optionally refined) physical grid."""
    grid = u.grid
    m = refined_size(grid.n, refine)
    c = u.coeffs if m == grid.n else pad_spectrum(u.coeffs, grid.n, m)
    axes = tuple(range(1, grid.dim + 1))
    return np.real(np.fft.ifftn(c, axes=axes)) * m**grid.dim


def pad_spectrum(coeffs: np.ndarray, n: int, m: int) -> np.ndarray:
    """Zero-pad coefficients from ``n`` to ``m`` modes per spatial axis.

    The Nyquist coefficient is split evenly between ``+n/2`` and ``-n/2`` so
    the padded field stays real and interpolates the original samples.
    """
    out = coeffs
    h = n // 2
    for ax in range(1, coeffs.ndim):
        shape = list(out.shape)
        shape[ax] = m
        new = np.zeros(shape, dtype=np.complex128)
        src = [slice(None)] * out.ndim
        dst = [slice(None)] * out.ndim
        src[ax], dst[ax] = slice(0, h), slice(0, h)
        new[tuple(dst)] = out[tuple(src)]
        src[ax], dst[ax] = slice(h + 1, n), slice(m - h + 1, m)
        new[tuple(dst)] = out[tuple(src)]
        src[ax] = h
        nyq = out[tuple(src)] / 2.0
        dst[ax] = h
        new[tuple(dst)] += nyq
        dst[ax] = m - h
        new[tuple(dst)] += nyq
        out = new
    return out


# ------------------------------------------------------------ linear operators


def leray_project(u: SpectralField) -> SpectralField:
    """Per-mode removal of the component parallel to ``k`` (identity at k = 0)."""
    if not u.is_vector:
        raise ValueError("Leray projection needs a vector field")
    k = u.grid.k
    kdotu = np.einsum("i...,i...->...", k, u.coeffs)
    return u.replace(u.coeffs - k * (kdotu * u.grid.inv_k2))


def mollify(u: SpectralField, m: MollifierSpec | float) -> SpectralField:
    if not isinstance(m, MollifierSpec):
        m = MollifierSpec(m)
    return u.replace(u.coeffs * m.symbol(u.grid))


def dealias(u: SpectralField) -> SpectralField:
    return u.replace(u.coeffs * u.grid.dealias_mask)


def laplacian(u: SpectralField) -> SpectralField:
    return u.replace(-u.grid.k2 * u.coeffs)


def stokes_laplacian(u: SpectralField) -> SpectralField:
    """``P Lap u``; equals ``Lap u`` when ``u`` is divergence-free."""
    return leray_project(laplacian(u))


def gradient(u: SpectralField) -> SpectralField:
    """Component ``i*dim + j`` holds ``d_j u_i``."""
    k = u.grid.k
    c = 1j * k[np.newaxis] * u.coeffs[:, np.newaxis]
    return u.replace(c.reshape((u.ncomp * u.grid.dim,) + u.grid.shape))


def divergence(u: SpectralField) -> SpectralField:
    return u.replace(1j * np.einsum("i...,i...->...", u.grid.k, u.coeffs))


def scalar_gradient(p: SpectralField) -> SpectralField:
    if p.ncomp != 1:
        raise ValueError("expected a scalar field")
    return p.replace(1j * p.grid.k * p.coeffs[0])


# -------------------------------------------------------------------- norms


def inner(u: SpectralField, v: SpectralField) -> float:
    _check_same_grid(u, v)
    return float(u.grid.volume * np.real(np.vdot(u.coeffs, v.coeffs)))


def norm_l2(u: SpectralField) -> float:
    return math.sqrt(u.grid.volume * float(np.sum(np.abs(u.coeffs) ** 2)))


def gradient_norm(u: SpectralField) -> float:
    """``||grad u||_2`` from ``sum |k|^2 |u_hat|^2``."""
    return math.sqrt(u.grid.volume * float(np.sum(u.grid.k2 * np.abs(u.coeffs) ** 2)))


def magnitude(u: SpectralField, refine: float = NORM_REFINE) -> np.ndarray:
    """Pointwise Euclidean length ``|u(x)|`` on the refined grid."""
    phys = inverse_transform(u, refine)
    return np.sqrt(np.sum(phys**2, axis=0))


def norm_q(u: SpectralField, q: float, refine: float = NORM_REFINE) -> float:
    """``||u||_q`` by grid quadrature on the refined grid (``q >= 1``)."""
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    return norms_from_magnitude(magnitude(u, refine), [q], u.grid.volume)[0]


def norm_inf(u: SpectralField, refine: float = NORM_REFINE) -> float:
    return float(np.max(magnitude(u, refine)))


def norms_from_magnitude(a: np.ndarray, qs, volume: float) -> list[float]:
    """L^q norms of a sampled magnitude; scaled by the max to avoid overflow."""
    amax = float(np.max(a))
    if amax == 0.0:
        return [0.0 for _ in qs]
    r = a / amax
    cell = volume / a.size
    out = []
    for q in qs:
        if not q >= 1:
            raise ValueError(f"q must be >= 1, got {q}")
        out.append(amax * float(np.sum(r**q) * cell) ** (1.0 / q))
    return out


def resample(u: SpectralField, n: int) -> SpectralField:
    """Same trigonometric polynomial on an ``n``-point grid (``n >= u.grid.n``)."""
    if n < u.grid.n:
        raise ValueError("resample only refines")
    grid = GridSpec(u.grid.dim, n)
    return SpectralField(grid, pad_spectrum(u.coeffs, u.grid.n, n))


def interpolation_ratio(u: SpectralField, q: float | None = None) -> float:
    """``||u||_inf / (||P Lap u||_2 ||grad u||_2)^(1/2)``, the constant of the 3D sup-norm bound.

    With ``q`` given, ``||u||_q`` replaces ``||grad u||_2`` (the bound before
    the Sobolev embedding; ``q = 6`` in 3D).
    """
    lower = gradient_norm(u) if q is None else norm_q(u, q)
    den = math.sqrt(norm_l2(stokes_laplacian(u)) * lower)
    return norm_inf(u) / den if den > 0 else 0.0
