import json

import numpy as np
import pytest

from conftest import random_ic
from mollns.errors import BlowUpError, ConfigError
from mollns.sweeps import (
    CACHE_ENV,
    SweepPlan,
    cache_dir,
    extrapolate_limit,
    inclusion_check,
    robustness,
    run_and_save,
    run_sweep,
)

ALPHAS = np.array([0.4, 0.2, 0.1, 0.05, 0.025])


def plan(tmp_path, ic, n=16, dt=1e-2, T=0.5, ms=(4, 8, 16), **kw):
    base = {"grid": {"dim": 2, "n": n}, "dt": dt, "T": T, "initial_condition": ic}
    base.update(kw.pop("base", {}))
    diag = kw.pop("diagnostics", {"windows": [[0.1, 0.3], [0.3, T]]})
    return SweepPlan.from_dict(
        {"base": base, "m_values": list(ms), "diagnostics": diag, "output_dir": str(tmp_path / "sw"), **kw}
    )


@pytest.fixture(autouse=True)
def _no_env_cache(monkeypatch):
    monkeypatch.delenv(CACHE_ENV, raising=False)


class TestExtrapolation:
    def test_zero_table(self):
        est = extrapolate_limit(np.zeros((5, 3)), ALPHAS, (4, 8, 16))
        assert est.value == 0.0 and est.converged
        assert est.slope is None

    def test_power_law(self):
        table = np.outer(-3.0 * ALPHAS, np.ones(3))
        est = extrapolate_limit(table, ALPHAS, (4, 8, 16))
        assert est.value == 0.0
        assert est.slope == pytest.approx(1.0)
        assert est.fit_residual < 1e-12

    def test_no_decay(self):
        table = np.outer(ALPHAS**-0.5, np.ones(3))
        est = extrapolate_limit(table, ALPHAS, (4, 8, 16))
        assert est.value is None and not est.converged

    def test_not_saturated(self):
        table = np.outer(ALPHAS, [1.0, 1.5, 2.0])
        est = extrapolate_limit(table, ALPHAS, (4, 8, 16))
        assert not est.converged
        assert est.note == "m-limit not converged"
        assert est.value is None

    def test_log_poly(self):
        y = np.exp(0.3 * ALPHAS - 0.2 * ALPHAS**2)
        est = extrapolate_limit(np.outer(y, np.ones(3)), ALPHAS, (4, 8, 16), method="log-poly")
        assert est.value == pytest.approx(1.0, abs=1e-10)

    def test_reversed_order_agrees(self):
        table = np.outer(2.0 * ALPHAS**1.5, [1.0, 1.0 + 1e-6, 1.0 + 1e-6])
        a = extrapolate_limit(table, ALPHAS, (4, 8, 16))
        b = extrapolate_limit(table, ALPHAS, (4, 8, 16), order="alpha-first")
        assert a.value == b.value == 0.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            extrapolate_limit(np.zeros((4, 3)), ALPHAS, (4, 8, 16))
        with pytest.raises(ValueError):
            extrapolate_limit(np.ones((5, 3)), ALPHAS, (4, 8, 16), method="spline")

    def test_robustness(self):
        rows = [
            {"variant": "a", "s": 0, "t": 1, "K": 1, "value": 0.0, "fit_residual": 0.1},
            {"variant": "a", "s": 0, "t": 1, "K": 10, "value": 0.05, "fit_residual": 0.1},
        ]
        (r,) = robustness(rows, "K")
        assert r["agree"] and r["spread"] == pytest.approx(0.05)


class TestPlan:
    def test_invalid(self, tmp_path):
        tg = {"name": "taylor-green-2d"}
        with pytest.raises(ConfigError):
            plan(tmp_path, tg, ms=(4, 8))
        with pytest.raises(ConfigError):
            plan(tmp_path, tg, ms=(8, 4, 16))
        with pytest.raises(ConfigError):
            plan(tmp_path, tg, ms=(4, 8, 32))
        with pytest.raises(ConfigError):
            plan(tmp_path, tg, base={"mollifier": {"m": 4}})
        with pytest.raises(ConfigError):
            plan(tmp_path, tg, initial_data=["other"])
        with pytest.raises(ConfigError):
            SweepPlan.from_dict({"base": {}, "m_values": [1, 2, 3], "extra": 1})

    def test_round_trip(self, tmp_path):
        p = plan(tmp_path, {"name": "taylor-green-2d"}, initial_data=["mollified", "master"])
        assert SweepPlan.from_dict(json.loads(json.dumps(p.to_dict()))) == p

    def test_config_for(self, tmp_path):
        p = plan(tmp_path, {"name": "taylor-green-2d"})
        c = p.config_for(8.0, "master")
        assert c.mollifier.m == 8.0 and c.initial_data == "master"
        assert c.snapshot_every == 1


class TestSweeps:
    def test_zero_data(self, tmp_path):
        rep = run_sweep(plan(tmp_path, {"name": "zero"}, diagnostics={"windows": [[0.1, 0.3]], "K1_values": [0.0]}))
        assert all(r["H"] == 0.0 for r in rep.h_table)
        assert all(r["value"] == 0.0 for r in rep.h_limits)
        assert all(r["degenerate"] for r in rep.f_table)
        assert all(r["note"] == "degenerate window" for r in rep.f_limits)
        assert np.all(np.array(rep.cauchy["mollified"]["matrix"]) == 0.0)
        assert rep.inclusion["holds"]

    def test_taylor_green_is_m_independent(self, tmp_path):
        rep = run_sweep(plan(tmp_path, {"name": "taylor-green-2d"}, initial_data=["master"]))
        assert np.max(np.array(rep.cauchy["master"]["matrix"])) < 1e-12
        for r in rep.h_limits:
            assert r["converged"] and r["value"] == 0.0
            assert r["slope"] > 0
        f = [r["value"] for r in rep.f_limits]
        # trapezoid error of the dissipation integral: (4 dt)^2 / 12
        np.testing.assert_allclose(f, 1.0, atol=(4 * 1e-2) ** 2 / 12 * 1.01)

    def test_cauchy_decreases(self, tmp_path):
        ic = random_ic(seed=2, band=(1.0, 8.0), norm=3.0, slope=0.0)
        p = plan(tmp_path, ic, n=32, dt=1e-3, T=0.1, ms=(4, 8, 16, 32), initial_data=["master"],
                 diagnostics={"windows": [[0.02, 0.1]]})
        rep = run_sweep(p)
        C = np.array(rep.cauchy["master"]["matrix"])
        last = C[:-1, -1]
        assert np.all(np.diff(last) < 0)
        assert last[-1] > 0

    def test_resume_is_bit_identical(self, tmp_path):
        p = plan(tmp_path, random_ic(), n=16, dt=1e-2, T=0.5, initial_data=["mollified", "master"])
        run_and_save(p, jobs=2)
        report = tmp_path / "sw" / "report"
        first = {f.name: f.read_bytes() for f in report.glob("*.csv")}
        for f in report.iterdir():
            f.unlink()
        runs_before = sorted(d.name for d in cache_dir(p.output_dir).iterdir())
        run_and_save(p, jobs=1)
        assert sorted(d.name for d in cache_dir(p.output_dir).iterdir()) == runs_before
        second = {f.name: f.read_bytes() for f in report.glob("*.csv")}
        assert first == second
        assert "sensitivity.csv" in first and "cauchy_master.csv" in first

    def test_inclusion_excludes_subsample_windows(self, tmp_path):
        rep = run_sweep(plan(tmp_path, random_ic(norm=2.0), dt=1e-3))
        out = inclusion_check(rep, windows=[(0.1, 0.3), (0.3055, 0.4), (0.2, 0.2)])
        assert out["holds"]
        assert [0.1, 0.3] in out["G1"] and [0.1, 0.3] in out["G2"]
        assert out["excluded"] == [[0.3055, 0.4], [0.2, 0.2]]

    def test_blow_up_aborts(self, tmp_path):
        p = plan(tmp_path, {"name": "taylor-green-2d"}, base={"blowup_ceiling": 0.5})
        with pytest.raises(BlowUpError, match="m=4"):
            run_sweep(p)

    def test_env_cache_override(self, tmp_path, monkeypatch):
        cache = tmp_path / "cache"
        monkeypatch.setenv(CACHE_ENV, str(cache))
        p = plan(tmp_path, {"name": "taylor-green-2d"}, initial_data=["master"])
        rep = run_sweep(p)
        assert sorted(d.name for d in cache.iterdir()) == sorted(r["run_key"] for r in rep.runs)
        assert not (tmp_path / "sw" / "runs").exists()

    def test_default_windows(self, tmp_path):
        rep = run_sweep(plan(tmp_path, {"name": "taylor-green-2d"}, diagnostics={}))
        assert {(r["s"], r["t"]) for r in rep.h_limits} == {(0.05, 0.25), (0.25, 0.5)}
