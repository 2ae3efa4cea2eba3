"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned."""

import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_ic
from mollns import diagnostics as dg
from mollns.initial import random_bandlimited
from mollns.solver import SimConfig, run
from mollns.spectral import (
    GridSpec,
    MollifierSpec,
    gradient_norm,
    interpolation_ratio,
    leray_project,
    forward_transform,
    norm_l2,
    resample,
    stokes_laplacian,
)
from mollns.sweeps import CACHE_ENV, SweepPlan, robustness, run_and_save

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
JOBS = min(4, os.cpu_count() or 1)


def verdict(pytestconfig, n: int, ok: bool, detail: str):
    line = f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\n" + line)
    assert ok, line


def default_plan(tmp, **base):
    data = json.loads((CONFIGS / "sweep_default.json").read_text())
    data.pop("schema_version")
    data["base"].update(base)
    data["output_dir"] = str(tmp)
    return SweepPlan.from_dict(data)


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    old = os.environ.get(CACHE_ENV)
    os.environ[CACHE_ENV] = str(root / "cache")
    try:
        plan = default_plan(root / "default")
        start = time.perf_counter()
        report = run_and_save(plan, jobs=JOBS)
        seconds = time.perf_counter() - start
        fine = run_and_save(default_plan(root / "fine", dt=5e-4), jobs=JOBS)
    finally:
        if old is None:
            os.environ.pop(CACHE_ENV, None)
        else:
            os.environ[CACHE_ENV] = old
    return {"plan": plan, "report": report, "fine": fine, "seconds": seconds}


@pytest.fixture(scope="module")
def run3d():
    cfg = SimConfig(grid=GridSpec(3, 32), mollifier=MollifierSpec(16.0), dt=1e-3, T=0.2,
                    initial_condition=random_ic(seed=1, band=(1.0, 1.5), norm=1.0, slope=4.0))
    return run(cfg)


def test_criterion_01_taylor_green(pytestconfig):
    cfg = json.loads((CONFIGS / "run_taylor_green.json").read_text())
    cfg.pop("schema_version")
    start = time.perf_counter()
    L = run(SimConfig.from_dict(cfg))
    seconds = time.perf_counter() - start
    err = abs(L.E[-1] / L.E[0] / math.exp(-4.0) - 1.0)
    verdict(pytestconfig, 1, err <= 1e-6 and seconds < 30.0,
            f"E(1)/E(0) vs exp(-4): rel err {err:.2e} (tol 1e-6), {seconds:.1f}s (limit 30s)")


def test_criterion_02_energy_equality(pytestconfig, sweep):
    coarse = {(r["variant"], r["m"]): r["budget_relative"] for r in sweep["report"].runs}
    fine = {(r["variant"], r["m"]): r["budget_relative"] for r in sweep["fine"].runs}
    worst = max(coarse.values())
    ratios = [coarse[k] / fine[k] for k in coarse]
    ok = worst <= 1e-6 and all(3.5 <= r <= 4.5 for r in ratios)
    verdict(pytestconfig, 2, ok,
            f"max budget {worst:.2e}*E(0) (tol 1e-6) over {len(coarse)} runs; "
            f"dt-halving ratios {min(ratios):.2f}..{max(ratios):.2f} (expect 4)")


def test_criterion_03_identity(pytestconfig, sweep):
    rep = sweep["report"]
    worst = 0.0
    for r in rep.h_table:
        led = rep.ledger(r["variant"], r["m"])
        worst = max(worst, r["weighted_identity_residual"] / led.E[led.index_of(r["s"])])
    rob = robustness(rep.h_limits, "K")
    Ks = sorted({r["K"] for r in rep.h_limits})
    ok = worst <= 1e-5 and all(g["agree"] for g in rob) and Ks == [0.1, 1.0, 10.0]
    verdict(pytestconfig, 3, ok,
            f"max identity residual {worst:.2e}*E(s) (tol 1e-5) over {len(rep.h_table)} points; "
            f"K-robust on {sum(g['agree'] for g in rob)}/{len(rob)} windows")


def test_criterion_04_two_dimensional_defect(pytestconfig, sweep):
    rep = sweep["report"]
    rows = [r for r in rep.h_limits if r["K"] == 1.0]
    slopes = [r["slope"] for r in rows]
    ok = (
        all(r["converged"] for r in rows)
        and all(0.8 <= s <= 1.2 for s in slopes)
        and all(abs(r["value"]) <= r["fit_residual"] for r in rows)
        and sweep["plan"].m_values == (4.0, 8.0, 16.0, 32.0, 64.0)
        and sweep["seconds"] < 600.0
    )
    verdict(pytestconfig, 4, ok,
            f"alpha-slopes {min(slopes):.3f}..{max(slopes):.3f} (band [0.8,1.2]); "
            f"H-hat 0 within residual {max(r['fit_residual'] for r in rows):.1e}; sweep {sweep['seconds']:.1f}s (limit 600s)")


def test_criterion_05_mean_value_factor(pytestconfig, sweep):
    rep = sweep["report"]
    err = 0.0
    for (variant, m), led in rep.ledgers.items():
        for s, t in rep.plan["diagnostics"]["windows"]:
            if not dg.is_degenerate(led, s, t):
                err = max(err, abs(dg.f_factor(led, 0.0, 0.0, s, t) - 1.0))
    values = [r["value"] for r in rep.f_limits]
    K1s = sorted({r["K1"] for r in rep.f_limits})
    rob = robustness(rep.f_limits, "K1")
    ok = (
        err <= 1e-5
        and all(v is not None and 0.0 < v <= 1.0 + 1e-5 for v in values)
        and 0.0 in K1s
        and all(g["agree"] for g in rob)
    )
    verdict(pytestconfig, 5, ok,
            f"|f(alpha=0) - 1| <= {err:.1e} (tol 1e-5); F-hat in [{min(values):.6f}, {max(values):.6f}] "
            f"(upper tol 1+1e-5); K1 {K1s} robust on {sum(g['agree'] for g in rob)}/{len(rob)} windows")


def test_criterion_06_uniform_estimate(pytestconfig, sweep, run3d):
    rep = sweep["report"]
    spreads = []
    for variant in rep.plan["initial_data"]:
        ratios = np.array([r["ratio"] for r in rep.uniform_bound if r["variant"] == variant])
        spreads.append(float(ratios.max() / ratios.min()))
    est3 = dg.uniform_bound_check(run3d)
    finite = all(np.isfinite(r["ratio"]) for r in rep.uniform_bound) and np.isfinite(est3.ratio)
    ok = finite and max(spreads) < 3.0
    verdict(pytestconfig, 6, ok,
            f"max/min ratio across m {max(spreads):.4f} (limit 3); 3D N=32 ratio {est3.ratio:.3e}")


def test_criterion_07_interpolation(pytestconfig):
    violations = 0
    worst = 0.0
    for i in range(1000):
        dim = 2 if i % 2 == 0 else 3
        g = GridSpec(dim, 16 if dim == 2 else 8)
        rng = np.random.default_rng(i)
        if i % 4 < 2:
            u = leray_project(forward_transform(rng.standard_normal((dim,) + g.shape), g))
        else:
            u = random_bandlimited(g, seed=i, band=(1.0, float(rng.uniform(1.5, g.n / 2 - 1))), slope=float(rng.uniform(0, 4)))
        lhs = gradient_norm(u) ** 2
        rhs = norm_l2(stokes_laplacian(u)) * norm_l2(u)
        worst = max(worst, lhs / rhs)
        violations += lhs > rhs * (1 + 1e-12)
    consts = {}
    for n in (16, 32):
        r = []
        for seed in range(40):
            u = random_bandlimited(GridSpec(3, 16), seed=seed, band=(1.0, 4.0), slope=float(seed % 4))
            r.append(interpolation_ratio(resample(u, n), q=6))
        consts[n] = max(r)
    drift = abs(consts[32] / consts[16] - 1.0)
    ok = violations == 0 and drift <= 0.2
    verdict(pytestconfig, 7, ok,
            f"{violations} violations in 1000 fields (max ratio {worst:.4f}); "
            f"sup-norm constant {consts[16]:.4f} (N=16) vs {consts[32]:.4f} (N=32), drift {drift:.1e} (limit 0.2)")


def test_criterion_08_mu_norm(pytestconfig, sweep, tg_ledger):
    rep = sweep["report"]
    spread = 0.0
    finite = True
    for q in (8, 16, 64):
        for variant in rep.plan["initial_data"]:
            vals = np.array([r["mu_norm"] for r in rep.mu_norms if r["q"] == q and r["variant"] == variant], dtype=float)
            finite &= bool(np.all(np.isfinite(vals)) and np.all(vals > 0))
            spread = max(spread, float(vals.max() / vals.min()))
    lim = dg.linf_limit(tg_ledger)
    dev = float(np.max(np.abs(lim - tg_ledger.Linf) / tg_ledger.Linf))
    ok = finite and spread < 3.0 and dev <= 0.01
    verdict(pytestconfig, 8, ok,
            f"mu-norms finite, max/min across m {spread:.4f} (limit 3); TG sup extrapolation deviation {dev:.1e} (tol 1e-2)")


def test_criterion_09_local_balance(pytestconfig, sweep):
    plan = sweep["plan"]
    d = plan.config_for(64.0, "mollified").to_dict()
    d.update(snapshot_window=[0.1, 0.3], snapshot_every=0)
    L = run(SimConfig.from_dict(d))
    E0 = L.E[0]
    bump = {"name": "von-mises", "params": {"kappa": 2.0, "center": [1.0, 2.0], "rate": 0.5}}
    terms = dg.local_energy_terms(L, bump, 0.1, 0.3)
    const = dg.local_energy_residual(L, {"name": "constant"}, 0.1, 0.3)
    global_res = dg.energy_relation_residual(L, 0.1, 0.3)
    same = abs(const - global_res) <= 1e-12 * E0
    ok = abs(terms["residual"]) <= 1e-4 * E0 and same and terms["flux"] != 0.0
    verdict(pytestconfig, 9, ok,
            f"von Mises residual {abs(terms['residual']) / E0:.2e}*E(0) (tol 1e-4); "
            f"constant cutoff {const:.3e} vs energy relation {global_res:.3e}")


def test_criterion_10_lower_bounds(pytestconfig, sweep, tg_ledger, run3d):
    leds = list(sweep["report"].ledgers.values()) + [tg_ledger, run3d]
    positive = all(np.all(L.D > 0) for L in leds)
    verdict_tg = dg.log_convexity_check(tg_ledger)
    ok = positive and verdict_tg.linear_defect <= 1e-8 and verdict_tg.convex
    verdict(pytestconfig, 10, ok,
            f"D > 0 at every sample of {len(leds)} runs; TG second difference of log E {verdict_tg.linear_defect:.1e} (tol 1e-8)")


def test_criterion_11_oracle_gate(pytestconfig):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "mollns.cli", "validate"], capture_output=True, text=True, timeout=120)
    seconds = time.perf_counter() - start
    lines = proc.stdout.strip().splitlines()
    ok = proc.returncode == 0 and seconds < 60.0 and lines[-1].startswith("PASS")
    verdict(pytestconfig, 11, ok, f"{len(lines) - 1} oracle checks, exit {proc.returncode}, {seconds:.1f}s (limit 60s)")
