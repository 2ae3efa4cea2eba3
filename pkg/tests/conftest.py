import math

import pytest

from mollns.solver import SimConfig, run
from mollns.spectral import GridSpec, MollifierSpec

TG_E0 = 2.0 * math.pi**2


def random_ic(seed=7, band=(1.0, 1.5), norm=1.0, slope=4.0):
    return {"name": "random-bandlimited", "params": {"seed": seed, "band": list(band), "norm": norm, "slope": slope}}


@pytest.fixture(scope="session")
def tg_ledger():
    """2D Taylor-Green, N=64, dt=1e-3, T=1, pressure snapshots on [0.1, 0.3]."""
    cfg = SimConfig(
        grid=GridSpec(2, 64),
        mollifier=MollifierSpec(64.0),
        dt=1e-3,
        T=1.0,
        initial_condition={"name": "taylor-green-2d"},
        snapshot_window=(0.1, 0.3),
    )
    return run(cfg)


@pytest.fixture(scope="session")
def random2d_ledger():
    cfg = SimConfig(
        grid=GridSpec(2, 64),
        mollifier=MollifierSpec(8.0),
        dt=1e-3,
        T=1.0,
        initial_condition=random_ic(norm=2.0),
        snapshot_window=(0.1, 0.3),
    )
    return run(cfg)


@pytest.fixture(scope="session")
def small2d_ledger():
    """Cheap nonlinear 2D run for structural tests."""
    cfg = SimConfig(
        grid=GridSpec(2, 32),
        mollifier=MollifierSpec(6.0),
        dt=1e-3,
        T=0.2,
        initial_condition=random_ic(seed=3, band=(1.0, 4.0), norm=3.0, slope=1.0),
        initial_data="master",
        snapshot_window=(0.05, 0.1),
    )
    return run(cfg)


@pytest.fixture(scope="session")
def zero_ledger():
    cfg = SimConfig(
        grid=GridSpec(2, 16), mollifier=MollifierSpec(8.0), dt=1e-2, T=0.5, initial_condition={"name": "zero"},
        snapshot_window=(0.1, 0.3),
    )
    return run(cfg)
