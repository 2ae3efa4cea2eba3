import math

import numpy as np
import pytest

from mollns import oracles
from mollns.initial import taylor_green_2d
from mollns.spectral import GridSpec, forward_transform
from mollns.validation import validate


def test_cost_guard():
    with pytest.raises(ValueError, match="cost guard"):
        oracles.OracleConfig(max_n_2d=256)
    with pytest.raises(ValueError):
        oracles.OracleConfig(max_n_3d=64)
    with pytest.raises(ValueError):
        oracles.OracleConfig(refine=0)
    with pytest.raises(ValueError):
        oracles.dft_bruteforce(np.zeros((2, 32, 32)))


def test_constant_transform():
    c = oracles.dft_bruteforce(np.full((1, 8, 8), 3.0))
    assert c[0, 0, 0] == pytest.approx(3.0)
    c[0, 0, 0] = 0
    assert np.max(np.abs(c)) < 1e-14


def test_direct_sum_round_trip():
    f = np.random.default_rng(0).standard_normal((3, 6, 6, 6))
    back = oracles.idft_bruteforce(oracles.dft_bruteforce(f))
    np.testing.assert_allclose(back, f, atol=1e-13)


def test_leray_oracle_on_gradient():
    g = GridSpec(2, 8)
    x, y = g.points()
    grad = np.array([np.cos(x) * np.sin(2 * y), 2 * np.sin(x) * np.cos(2 * y)])
    assert np.max(np.abs(oracles.leray_bruteforce(grad))) < 1e-14


def test_taylor_green_oracle():
    g = GridSpec(2, 16)
    ref = oracles.taylor_green(g)
    np.testing.assert_allclose(ref.coeffs, forward_transform(oracles.taylor_green_samples(g), g).coeffs, atol=1e-15)
    np.testing.assert_allclose(ref.coeffs, taylor_green_2d(g).coeffs, atol=1e-15)
    assert np.all(oracles.taylor_green(g, 1.0, viscosity=0.0).coeffs == ref.coeffs)
    assert np.max(np.abs(oracles.taylor_green(g, 50.0).coeffs)) < 1e-40
    with pytest.raises(ValueError):
        oracles.taylor_green(GridSpec(3, 8))


def test_quadrature():
    assert oracles.quadrature_refine(lambda t: 3 * t + 1, 0.0, 2.0, 5) == pytest.approx(8.0, abs=1e-13)
    q = oracles.quadrature_refine(np.exp, 0.0, 1.0, 101)
    # 400 trapezoid panels: error h^2/12 * (e - 1)
    assert q - (math.e - 1) == pytest.approx((1 / 400) ** 2 / 12 * (math.e - 1), rel=1e-3)
    with pytest.raises(ValueError):
        oracles.quadrature_refine(np.exp, 0.0, 1.0, 1)


def test_fd_time_derivative():
    t = np.linspace(0, 1, 11)
    assert oracles.fd_time_derivative(t**2, t, 5) == pytest.approx(1.0)
    for j in (0, 10):
        with pytest.raises(IndexError):
            oracles.fd_time_derivative(t, t, j)


@pytest.mark.parametrize("profile", ["smooth-step", "exp-step"])
def test_symbol_reference(profile):
    assert oracles.symbol_reference(0.0, profile) == 1.0
    assert oracles.symbol_reference(0.5, profile) == 1.0
    assert oracles.symbol_reference(1.0, profile) == 0.0
    assert 0.0 < oracles.symbol_reference(0.75, profile) < 1.0


def test_validate():
    result = validate()
    failed = [c.line() for c in result.checks if not c.passed]
    assert not failed, failed
    assert len(result.checks) >= 20
    assert result.to_dict()["passed"]
