"""Agreement suite between the fast paths and the slow oracles."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from mollns import oracles
from mollns.diagnostics import h_integral
from mollns.initial import random_bandlimited
from mollns.solver import SimConfig, advection, grad_energy_rate, nonlinear_term, pressure, rhs, run
from mollns.spectral import (
    GridSpec,
    MollifierSpec,
    SpectralField,
    divergence,
    forward_transform,
    gradient_norm,
    inner,
    inverse_transform,
    laplacian,
    leray_project,
    mollify,
    norm_inf,
    norm_l2,
    norm_q,
    stokes_laplacian,
)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    error: float
    tol: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  error={self.error:.3e}  tol={self.tol:.1e}"


@dataclass
class ValidationResult:
    checks: list
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "seconds": self.seconds, "checks": [asdict(c) for c in self.checks]}


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


def _random_samples(grid: GridSpec, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((grid.dim,) + grid.shape)


def _transform_checks(cfg: oracles.OracleConfig):
    for dim in (2, 3):
        grid = GridSpec(dim, cfg.max_n(dim))
        f = _random_samples(grid, 10 + dim)
        brute = oracles.dft_bruteforce(f, cfg)
        fast = forward_transform(f, grid)
        yield Check(f"forward transform vs direct sum ({dim}D N={grid.n})", *_ok(_rel(fast.coeffs, brute), 1e-10))
        yield Check(
            f"inverse transform vs direct synthesis ({dim}D N={grid.n})",
            *_ok(_rel(inverse_transform(fast), oracles.idft_bruteforce(brute, cfg)), 1e-10),
        )
        yield Check(
            f"Leray projector vs per-mode loop ({dim}D N={grid.n})",
            *_ok(_rel(leray_project(fast).coeffs, oracles.leray_bruteforce(f, cfg)), 1e-10),
        )


def _ok(err: float, tol: float):
    return bool(err <= tol), float(err), tol


def _mollifier_checks():
    grid = GridSpec(2, 16)
    err = 0.0
    for profile in ("smooth-step", "exp-step"):
        for m in (3.0, 5.5, 9.0):
            spec = MollifierSpec(m, profile)
            sym = spec.symbol(grid)
            ref = np.vectorize(lambda k: oracles.symbol_reference(k / m, profile))(grid.k_abs)
            err = max(err, float(np.max(np.abs(sym - ref))))
    yield Check("mollifier symbol vs scalar profile", *_ok(err, 1e-14))
    u = forward_transform(_random_samples(grid, 5), grid)
    yield Check("mollifier is the identity for m >= 2N", *_ok(_rel(mollify(u, 2.0 * grid.n).coeffs, u.coeffs), 0.0))


def _operator_checks(cfg: oracles.OracleConfig):
    grid = GridSpec(2, cfg.max_n_2d)
    tg = oracles.taylor_green(grid)
    yield Check("Taylor-Green energy 2*pi^2", *_ok(abs(norm_l2(tg) ** 2 - 2 * math.pi**2) / (2 * math.pi**2), 1e-12))
    # quadrature of the analytic gradient on a refined grid
    x, y = grid.points(cfg.refine)
    grad2 = 2 * (np.cos(x) * np.cos(y)) ** 2 + 2 * (np.sin(x) * np.sin(y)) ** 2
    quad = float(np.mean(grad2)) * grid.volume
    yield Check("gradient norm vs refined quadrature", *_ok(abs(gradient_norm(tg) ** 2 - quad) / quad, 1e-12))
    yield Check("Stokes operator on Taylor-Green is -2 v", *_ok(_rel(stokes_laplacian(tg).coeffs, -2 * tg.coeffs), 1e-14))
    u = oracles.taylor_green_samples(grid, refine=cfg.refine)
    mag = np.sqrt(np.sum(u**2, axis=0))
    for q in (4.0, 8.0):
        ref = (float(np.mean(mag**q)) * grid.volume) ** (1 / q)
        yield Check(f"L^{q:g} norm vs refined quadrature", *_ok(abs(norm_q(tg, q) - ref) / ref, 1e-10))
    yield Check("sup norm of Taylor-Green", *_ok(abs(norm_inf(tg) - 1.0), 1e-12))
    yield Check("Taylor-Green advection is a gradient", *_ok(float(np.max(np.abs(nonlinear_term(tg, 64.0).coeffs))), 1e-14))
    p_ref = oracles.dft_bruteforce(oracles.taylor_green_pressure_samples(grid)[np.newaxis], cfg)
    yield Check("Taylor-Green pressure vs direct sum", *_ok(_rel(pressure(tg, 64.0).coeffs, p_ref), 1e-10))
    for dim in (2, 3):
        g = GridSpec(dim, cfg.max_n(dim))
        v = leray_project(forward_transform(_random_samples(g, 20 + dim), g))
        m = MollifierSpec(g.n / 3)
        nl = nonlinear_term(v, m)
        scale = norm_l2(v) * gradient_norm(v) * norm_inf(v)
        yield Check(f"energy neutrality of advection ({dim}D)", *_ok(abs(inner(nl, v)) / scale, 1e-10))
        p = pressure(v, m)
        adv = advection(v, m)
        res = laplacian(p).coeffs[0] + divergence(adv).coeffs[0]
        yield Check(f"pressure Poisson residual ({dim}D)", *_ok(norm_l2(SpectralField(g, res)) / norm_l2(adv), 1e-10))


def _quadrature_checks(cfg: oracles.OracleConfig):
    lin = oracles.quadrature_refine(lambda t: 3 * t + 1, 0.0, 2.0, 5, cfg.refine)
    yield Check("refined trapezoid exact on linear integrand", *_ok(abs(lin - 8.0), 1e-13))
    grid = GridSpec(2, 16)
    dt = 5e-4
    led = run(SimConfig(grid=grid, mollifier=MollifierSpec(16.0), dt=dt, T=0.5))
    E0 = led.E[0]

    def integrand(tau):
        E = E0 * np.exp(-4 * tau)
        D = 2 * E
        return 0.1 * E * (-4 * D) / (1 + D) ** 1.1

    ref = oracles.quadrature_refine(integrand, 0.1, 0.5, int(round(0.4 / dt)) + 1, cfg.refine)
    h = h_integral(led, 0.1, 1.0, 0.1, 0.5)
    yield Check("weighted integral vs 4x refined quadrature", *_ok(abs(h - ref) / abs(ref), 1e-6))
    exact = oracles.taylor_green(grid, 0.5)
    yield Check("Taylor-Green energy at t=0.5", *_ok(abs(led.E[-1] - norm_l2(exact) ** 2) / led.E[-1], 1e-6))
    j = len(led) // 2
    fd = oracles.fd_time_derivative(led.E, led.t, j)
    yield Check("finite-difference energy rate is -4E", *_ok(abs(fd + 4 * led.E[j]) / (4 * led.E[j]), 1e-5))


def _trajectory_checks():
    grid = GridSpec(2, 16)
    v0 = random_bandlimited(grid, seed=3, band=(1.0, 4.0), norm=3.0)
    m = MollifierSpec(6.0)
    dt = 5e-4
    cfg = SimConfig(
        grid=grid, mollifier=m, dt=dt, T=0.05, initial_condition={"name": "zero"}, snapshot_every=1, initial_data="master"
    )
    led = run(cfg, v0=v0)
    j = 50
    fdG = oracles.fd_time_derivative(led.D, led.t, j)
    yield Check("instantaneous dD/dt vs centered difference", *_ok(abs(led.G[j] - fdG) / abs(led.G[j]), 1e-4))
    snaps = led.snapshots["velocity"]
    fd_v = (snaps[j + 1] - snaps[j - 1]) / (2 * dt)
    r = rhs(SpectralField(grid, snaps[j]), m)
    yield Check("rhs vs centered difference of the trajectory", *_ok(_rel(fd_v, r.coeffs), 1e-4))
    g = grad_energy_rate(SpectralField(grid, snaps[j]), m)
    yield Check("ledger G equals grad_energy_rate", *_ok(abs(g - led.G[j]) / abs(g), 1e-12))


def validate(config: oracles.OracleConfig = oracles.DEFAULT) -> ValidationResult:
    start = time.perf_counter()
    checks = []
    for group in (
        _transform_checks(config),
        _mollifier_checks(),
        _operator_checks(config),
        _quadrature_checks(config),
        _trajectory_checks(),
    ):
        checks.extend(group)
    return ValidationResult(checks=checks, seconds=time.perf_counter() - start)
