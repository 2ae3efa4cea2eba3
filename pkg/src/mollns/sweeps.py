"""Families of runs over the mollification index and their double limits.

Runs are cached under ``<cache>/<run_key>/`` where the key hashes the full
run configuration together with the master initial field, so sweeps that
share runs (different alpha grids or windows) never recompute them.
"""

from __future__ import annotations

import json
import logging
import math
import os
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from mollns import diagnostics as dg
from mollns.errors import BlowUpError, ConfigError, DegenerateWindowError
from mollns.initial import build_initial
from mollns.ledger import TimeSeriesLedger
from mollns.solver import SimConfig, field_hash, run, run_key
from mollns.spectral import GridSpec

log = logging.getLogger(__name__)

CACHE_ENV = "MOLLNS_CACHE_DIR"
SATURATION_TOL = 1e-3


# ----------------------------------------------------------------- the plan


@dataclass(frozen=True)
class SweepPlan:
    base: dict
    m_values: tuple
    diagnostics: dg.DiagnosticsConfig = field(default_factory=dg.DiagnosticsConfig)
    output_dir: str = "sweep"
    jobs: int = 1
    initial_data: tuple = ("mollified",)
    saturation_tol: float = SATURATION_TOL
    cauchy: bool = True

    def __post_init__(self):
        ms = tuple(float(m) for m in self.m_values)
        if len(ms) < 3:
            raise ConfigError("an m-sweep needs at least three values")
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ConfigError("m values must be strictly increasing")
        if ms[0] <= 0:
            raise ConfigError("m values must be positive")
        try:
            grid = GridSpec(**self.base["grid"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid base grid: {exc}") from None
        if ms[-1] > grid.n:
            raise ConfigError(f"m={ms[-1]:g} exceeds the resolution N={grid.n}: its plateau m/2 would pass the Nyquist mode")
        if "mollifier" in self.base and "m" in (self.base["mollifier"] or {}):
            raise ConfigError("the base config must not fix the mollification index")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        variants = tuple(self.initial_data)
        if not variants or any(v not in ("mollified", "master") for v in variants):
            raise ConfigError("initial_data variants must be 'mollified' and/or 'master'")
        object.__setattr__(self, "m_values", ms)
        object.__setattr__(self, "initial_data", variants)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(**self.base["grid"])

    def config_for(self, m: float, variant: str) -> SimConfig:
        d = json.loads(json.dumps(self.base))
        d.pop("initial_data", None)
        moll = dict(d.pop("mollifier", None) or {})
        moll["m"] = m
        d["mollifier"] = moll
        d["initial_data"] = variant
        if self.cauchy and not d.get("snapshot_every"):
            nsamples = round(d["T"] / d["dt"]) // d.get("sample_stride", 1)
            d["snapshot_every"] = max(1, nsamples // 50)
        return SimConfig.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "m_values": list(self.m_values),
            "diagnostics": self.diagnostics.to_dict(),
            "output_dir": self.output_dir,
            "jobs": self.jobs,
            "initial_data": list(self.initial_data),
            "saturation_tol": self.saturation_tol,
            "cauchy": self.cauchy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        d = {k: v for k, v in d.items() if k != "schema_version"}
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown plan keys {sorted(unknown)}")
        if "base" not in d or "m_values" not in d:
            raise ConfigError("a plan needs 'base' and 'm_values'")
        d["diagnostics"] = dg.DiagnosticsConfig.from_dict(d.get("diagnostics") or {})
        d["m_values"] = tuple(d["m_values"])
        if "initial_data" in d:
            d["initial_data"] = tuple(d["initial_data"])
        return cls(**d)


# ------------------------------------------------------------ extrapolation


@dataclass(frozen=True)
class LimitEstimate:
    value: float | None
    slope: float | None
    fit_residual: float | None
    converged: bool
    saturation: tuple
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _alpha_limit(alphas: np.ndarray, y: np.ndarray, method: str):
    """Return ``(value, slope, residual, note)`` of the alpha -> 0 limit."""
    if np.all(y == 0):
        return 0.0, None, 0.0, "identically zero: slope undefined"
    if method == "power":
        if not (np.all(y > 0) or np.all(y < 0)):
            return None, None, None, "sign change: power law not applicable"
        sign = float(np.sign(y[0]))
        p, a = np.polyfit(np.log(alphas), np.log(np.abs(y)), 1)
        fit = sign * np.exp(a) * alphas**p
        resid = float(np.max(np.abs(fit - y)))
        if p <= 0:
            return None, float(p), resid, "non-positive slope: no decay as alpha -> 0"
        return 0.0, float(p), resid, ""
    if method == "log-poly":
        if not (np.all(y > 0) or np.all(y < 0)):
            return None, None, None, "sign change: log fit not applicable"
        sign = float(np.sign(y[0]))
        ly = np.log(np.abs(y))
        deg = min(3, len(alphas) - 2) if len(alphas) > 2 else 1
        coef = np.polyfit(alphas, ly, deg)
        value = sign * math.exp(coef[-1])
        lower = np.polyfit(alphas, ly, deg - 1) if deg > 1 else coef
        misfit = float(np.max(np.abs(sign * np.exp(np.polyval(coef, alphas)) - y)))
        resid = max(misfit, abs(value - sign * math.exp(lower[-1])))
        return value, float(value * coef[-2]), resid, ""
    raise ValueError(f"unknown extrapolation method {method!r}")


def _saturation(col_prev: np.ndarray, col_last: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.abs(col_last), np.abs(col_prev))
    diff = np.abs(col_last - col_prev)
    return np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)


def extrapolate_limit(
    table,
    alphas,
    m_values=None,
    order: str = "m-first",
    method: str = "power",
    saturation_tol: float = SATURATION_TOL,
) -> LimitEstimate:
    """``lim_{alpha->0} lim_{m->inf}`` of ``table[i, j] = value(alphas[i], m_values[j])``.

    The m-limit is the largest-m column once the last two columns agree to
    ``saturation_tol`` (relative).  ``method="power"`` fits
    ``log|value| = log c + p log alpha`` and returns 0 with slope ``p`` when
    ``p > 0``; ``method="log-poly"`` fits a cubic in alpha to ``log|value|``
    and returns its intercept, with the change against the quadratic fit
    folded into the residual.  ``order="alpha-first"`` swaps the two limits.
    """
    T = np.atleast_2d(np.asarray(table, dtype=float))
    alphas = np.asarray(alphas, dtype=float)
    if T.shape[0] != len(alphas):
        raise ValueError("table rows must match the alpha grid")
    if len(alphas) < 2:
        raise ValueError("need at least two alpha values")
    if order == "m-first":
        if T.shape[1] >= 2:
            sat = _saturation(T[:, -2], T[:, -1])
            if np.any(sat >= saturation_tol):
                return LimitEstimate(None, None, None, False, tuple(sat.tolist()), "m-limit not converged")
        else:
            sat = np.zeros(len(alphas))
        value, slope, resid, note = _alpha_limit(alphas, T[:, -1], method)
        return LimitEstimate(value, slope, resid, value is not None, tuple(sat.tolist()), note)
    if order == "alpha-first":
        per_m = [_alpha_limit(alphas, T[:, j], method) for j in range(T.shape[1])]
        if any(v[0] is None for v in per_m):
            return LimitEstimate(None, None, None, False, (), "alpha-limit undefined for some m")
        vals = np.array([v[0] for v in per_m])
        sat = _saturation(vals[-2:-1], vals[-1:]) if len(vals) >= 2 else np.zeros(1)
        ok = bool(np.all(sat < saturation_tol))
        last = per_m[-1]
        return LimitEstimate(
            float(vals[-1]) if ok else None, last[1], last[2], ok, tuple(sat.tolist()), "" if ok else "m-limit not converged"
        )
    raise ValueError(f"unknown limit order {order!r}")


# ------------------------------------------------------------------ the cache


def cache_dir(output_dir: str | Path) -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path(output_dir) / "runs"


def _is_complete(d: Path) -> bool:
    return (d / "ledger.csv").exists() and (d / "meta.json").exists()


def execute_run(config_dict: dict, dest: str) -> str:
    """Run one configuration and move its files into ``dest`` atomically."""
    ledger = run(SimConfig.from_dict(config_dict))
    dest_p = Path(dest)
    dest_p.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=dest_p.parent))
    ledger.save(tmp)
    try:
        os.replace(tmp, dest_p)
    except OSError:
        # another worker finished the same key first
        shutil.rmtree(tmp, ignore_errors=True)
    return ledger.meta["run_key"]


def ensure_runs(configs: list[SimConfig], root: Path, jobs: int = 1) -> dict[str, Path]:
    """Return run directories keyed by run key, computing the missing ones."""
    todo = []
    dirs = {}
    for cfg in configs:
        key = run_key(cfg)
        d = root / key
        dirs[key] = d
        if not _is_complete(d) and all(key != k for k, _ in todo):
            todo.append((key, cfg))
    if todo:
        log.info("running %d of %d configurations", len(todo), len(configs))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(execute_run, c.to_dict(), str(root / k)): c for k, c in todo}
            for fut, cfg in futures.items():
                _collect(fut.result, cfg)
    else:
        for key, cfg in todo:
            _collect(lambda: execute_run(cfg.to_dict(), str(root / key)), cfg)
    return dirs


def _collect(fn, cfg: SimConfig):
    try:
        fn()
    except BlowUpError as exc:
        raise BlowUpError(
            f"sweep aborted at m={cfg.mollifier.m:g}: {exc}", t=exc.t, value=exc.value, config=cfg.to_dict()
        ) from None


# ------------------------------------------------------------------ the report


@dataclass
class SweepReport:
    plan: dict
    v0_hash: str
    runs: list = field(default_factory=list)
    h_table: list = field(default_factory=list)
    h_limits: list = field(default_factory=list)
    f_table: list = field(default_factory=list)
    f_limits: list = field(default_factory=list)
    cauchy: dict = field(default_factory=dict)
    uniform_bound: list = field(default_factory=list)
    mu_norms: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    sensitivity: list = field(default_factory=list)
    inclusion: dict = field(default_factory=dict)
    ledgers: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "ledgers"}
        return json.loads(json.dumps(d, default=dg._json_default))

    def save(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "sweep.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        tables = {
            "runs": self.runs,
            "h_table": self.h_table,
            "h_limits": self.h_limits,
            "f_table": self.f_table,
            "f_limits": self.f_limits,
            "uniform_bound": self.uniform_bound,
            "mu_norms": self.mu_norms,
            "windows": self.windows,
            "sensitivity": self.sensitivity,
        }
        for name, rows in tables.items():
            if rows:
                (d / f"{name}.csv").write_text(dg.rows_to_csv([_flat(r) for r in rows]))
        for variant, c in self.cauchy.items():
            rows = [{"m": m, **{f"m={m2:g}": v for m2, v in zip(c["m"], row)}} for m, row in zip(c["m"], c["matrix"])]
            (d / f"cauchy_{variant}.csv").write_text(dg.rows_to_csv(rows))
        return d

    def ledger(self, variant: str, m: float) -> TimeSeriesLedger:
        return self.ledgers[(variant, float(m))]


def _flat(row: dict) -> dict:
    return {k: (json.dumps(v) if isinstance(v, (list, tuple, dict)) else v) for k, v in row.items()}


def cauchy_matrix(ledgers: list[TimeSeriesLedger]) -> np.ndarray:
    """``C[i, j] = int_0^T ||grad(v_i - v_j)||_2 dtau`` on the common snapshot times."""
    snaps = [L.snapshots for L in ledgers]
    if any(s is None or "velocity" not in s for s in snaps):
        raise ValueError("Cauchy matrix needs velocity snapshots")
    t = snaps[0]["t"]
    if any(len(s["t"]) != len(t) or np.any(np.abs(s["t"] - t) > 1e-12) for s in snaps):
        raise ValueError("snapshot times differ between runs")
    cfg = ledgers[0].meta["config"]
    grid = GridSpec(**cfg["grid"])
    n = len(ledgers)
    C = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            diff = snaps[i]["velocity"] - snaps[j]["velocity"]
            axes = tuple(range(1, diff.ndim))
            g = np.sqrt(grid.volume * np.sum(grid.k2 * np.abs(diff) ** 2, axis=axes))
            C[i, j] = C[j, i] = float(np.trapezoid(g, t)) if len(t) > 1 else 0.0
    return C


def _window_record(led: TimeSeriesLedger, s: float, t: float, H_hat: float | None, energy_tol: float) -> dict:
    rec = {"s": s, "t": t, "excluded": False, "H_hat": H_hat}
    try:
        i, j = led.index_of(s), led.index_of(t)
    except ValueError:
        i = j = None
    if i is None or j - i < 1:
        rec.update(excluded=True, in_G1=False, in_G2=False, constant_energy=False, degenerate_F=False)
        return rec
    E0 = float(led.E[0])
    tol = energy_tol * E0
    res = dg.energy_relation_residual(led, s, t, H_hat or 0.0)
    constant = dg.is_degenerate(led, s, t)
    try:
        dg.f_factor(led, 0.0, 0.0, s, t)
        degenerate = False
    except DegenerateWindowError:
        degenerate = True
    diss = 2.0 * led.viscosity * led.integrate(led.D, s, t)
    rec.update(
        energy_residual=res,
        tol=tol,
        in_G1=bool(abs(res) <= tol),
        constant_energy=bool(constant),
        degenerate_F=degenerate,
        in_G2=bool((not degenerate) or (constant and diss <= tol)),
    )
    return rec


def inclusion_check(report: SweepReport, windows=None) -> dict:
    """Discrete shadow of the inclusion of energy-equality instants.

    Every window on which the energy relation closes (with the extrapolated
    defect) must also carry a well-defined mean-value factor, and windows
    with an undefined factor must be exactly those of constant energy.
    """
    plan = report.plan
    variant = plan["initial_data"][0]
    m_last = float(plan["m_values"][-1])
    led = report.ledgers.get((variant, m_last))
    energy_tol = plan["diagnostics"]["energy_tol"]
    K = plan["diagnostics"]["K_values"][0]
    if windows is None:
        records = [w for w in report.windows if w.get("variant", variant) == variant]
    else:
        records = []
        for s, t in windows:
            H_hat = _lookup_h(report, variant, K, s, t)
            if led is None:
                raise ValueError("inclusion check on new windows needs the sweep ledgers")
            records.append(_window_record(led, float(s), float(t), H_hat, energy_tol))
    active = [r for r in records if not r["excluded"]]
    subset = all(r["in_G2"] for r in active if r["in_G1"])
    same = all(r["degenerate_F"] == r["constant_energy"] for r in active)
    return {
        "holds": bool(subset and same),
        "G1_subset_G2": bool(subset),
        "degenerate_are_constant": bool(same),
        "G1": [[r["s"], r["t"]] for r in active if r["in_G1"]],
        "G2": [[r["s"], r["t"]] for r in active if r["in_G2"]],
        "excluded": [[r["s"], r["t"]] for r in records if r["excluded"]],
    }


def _lookup_h(report: SweepReport, variant: str, K: float, s: float, t: float):
    for r in report.h_limits:
        if r["variant"] == variant and r["K"] == K and r["s"] == s and r["t"] == t:
            return r["value"]
    return None


def run_sweep(plan: SweepPlan, jobs: int | None = None) -> SweepReport:
    """Execute (or reuse) every run of the plan and assemble the tables."""
    jobs = plan.jobs if jobs is None else jobs
    grid = plan.grid
    ic = plan.base.get("initial_condition", {"name": "taylor-green-2d"})
    v0 = build_initial(grid, ic["name"], ic.get("params"))
    root = cache_dir(plan.output_dir)
    configs = {(v, m): plan.config_for(m, v) for v in plan.initial_data for m in plan.m_values}
    dirs = ensure_runs(list(configs.values()), root, jobs)
    report = SweepReport(plan=plan.to_dict(), v0_hash=field_hash(v0))
    keys = {vm: run_key(cfg) for vm, cfg in configs.items()}
    for vm, key in keys.items():
        report.ledgers[vm] = TimeSeriesLedger.load(dirs[key])

    dcfg = plan.diagnostics
    alphas = np.array(dcfg.alphas)
    for (variant, m), key in keys.items():
        led = report.ledgers[(variant, m)]
        E0 = float(led.E[0])
        budget = float(np.max(np.abs(led.energy_budget())))
        report.runs.append(
            {"variant": variant, "m": m, "run_key": key, "E0": E0, "budget_residual": budget,
             "budget_relative": budget / E0 if E0 > 0 else 0.0, "enstrophy_positive": bool(np.all(led.D > 0))}
        )
        est = dg.uniform_bound_check(led)
        report.uniform_bound.append({"variant": variant, "m": m, "run_key": key, **asdict(est)})
        for q in dcfg.q_grid:
            try:
                mu = dg.mu_norm(led, q)
            except KeyError:
                mu = None
            report.mu_norms.append({"variant": variant, "m": m, "q": q, "mu_norm": mu, "run_key": key})

    for variant in plan.initial_data:
        leds = [report.ledgers[(variant, m)] for m in plan.m_values]
        for (s, t) in dcfg.windows or dg.auto_windows(leds[0]):
            for K in dcfg.K_values:
                table = np.zeros((len(alphas), len(plan.m_values)))
                for j, (m, led) in enumerate(zip(plan.m_values, leds)):
                    for i, a in enumerate(alphas):
                        terms = dg.weighted_identity_terms(led, a, K, s, t)
                        table[i, j] = terms["h"]
                        report.h_table.append(
                            {"variant": variant, "s": s, "t": t, "K": K, "alpha": a, "m": m, "H": terms["h"],
                             "weighted_identity_residual": terms["residual"], "run_key": keys[(variant, m)]}
                        )
                est = extrapolate_limit(table, alphas, plan.m_values, "m-first", "power", plan.saturation_tol)
                rev = extrapolate_limit(table, alphas, plan.m_values, "alpha-first", "power", plan.saturation_tol)
                report.h_limits.append(
                    {"variant": variant, "s": s, "t": t, "K": K, **est.to_dict(),
                     "reversed_value": rev.value, "reversed_converged": rev.converged}
                )
            for K1 in dcfg.K1_values:
                table = np.full((len(alphas), len(plan.m_values)), np.nan)
                degenerate = False
                for j, (m, led) in enumerate(zip(plan.m_values, leds)):
                    for i, a in enumerate(alphas):
                        try:
                            f = dg.f_factor(led, a, K1, s, t)
                        except DegenerateWindowError:
                            f, degenerate = None, True
                        else:
                            table[i, j] = f
                        report.f_table.append(
                            {"variant": variant, "s": s, "t": t, "K1": K1, "alpha": a, "m": m, "F": f,
                             "degenerate": f is None, "run_key": keys[(variant, m)]}
                        )
                if degenerate:
                    report.f_limits.append(
                        {"variant": variant, "s": s, "t": t, "K1": K1, "value": None, "slope": None,
                         "fit_residual": None, "converged": False, "saturation": [], "note": "degenerate window"}
                    )
                    continue
                est = extrapolate_limit(table, alphas, plan.m_values, "m-first", "log-poly", plan.saturation_tol)
                rev = extrapolate_limit(table, alphas, plan.m_values, "alpha-first", "log-poly", plan.saturation_tol)
                report.f_limits.append(
                    {"variant": variant, "s": s, "t": t, "K1": K1, **est.to_dict(),
                     "reversed_value": rev.value, "reversed_converged": rev.converged}
                )
            H_hat = _lookup_h(report, variant, dcfg.K_values[0], s, t)
            rec = _window_record(leds[-1], s, t, H_hat, dcfg.energy_tol)
            rec["variant"] = variant
            report.windows.append(rec)
        if plan.cauchy:
            C = cauchy_matrix(leds)
            report.cauchy[variant] = {"m": list(plan.m_values), "matrix": C.tolist()}

    if len(plan.initial_data) > 1:
        ref = plan.initial_data[0]
        for other in plan.initial_data[1:]:
            for name, rows in (("H", report.h_limits), ("F", report.f_limits)):
                for r in rows:
                    if r["variant"] != other:
                        continue
                    k = "K" if name == "H" else "K1"
                    base = next(b for b in rows if b["variant"] == ref and b["s"] == r["s"] and b["t"] == r["t"] and b[k] == r[k])
                    diff = None if base["value"] is None or r["value"] is None else abs(base["value"] - r["value"])
                    report.sensitivity.append(
                        {"quantity": name, "s": r["s"], "t": r["t"], k: r[k], "reference": ref, "variant": other,
                         "reference_value": base["value"], "variant_value": r["value"], "abs_difference": diff}
                    )
    report.inclusion = inclusion_check(report)
    return report


def robustness(rows: list[dict], key: str) -> list[dict]:
    """Spread of the extrapolated values across ``key`` per (variant, window)."""
    out = []
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["variant"], r["s"], r["t"]), []).append(r)
    for (variant, s, t), rs in groups.items():
        vals = [r["value"] for r in rs if r["value"] is not None]
        res = [r["fit_residual"] or 0.0 for r in rs]
        spread = max(vals) - min(vals) if vals else math.nan
        out.append(
            {"variant": variant, "s": s, "t": t, key: [r[key] for r in rs], "spread": spread,
             "combined_residual": float(sum(res)), "agree": bool(len(vals) == len(rs) and spread <= sum(res))}
        )
    return out


def run_and_save(plan: SweepPlan, jobs: int | None = None) -> SweepReport:
    start = time.perf_counter()
    report = run_sweep(plan, jobs)
    out = Path(plan.output_dir) / "report"
    report.save(out)
    (out / "timing.json").write_text(json.dumps({"wall_seconds": time.perf_counter() - start}))
    return report
