"""Energy identities and inequalities evaluated on a recorded ledger.

All time integrals use the composite trapezoid rule on the sample grid and
all window endpoints must be sample instants.  ``G`` is the instantaneous
spectral value of ``d/dt ||grad v||^2`` stored by the solver; finite
differences of ``D`` are only used as a cross-check.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from mollns.bumps import make_bump
from mollns.errors import ConfigError, DegenerateWindowError
from mollns.ledger import TimeSeriesLedger
from mollns.spectral import GridSpec, MollifierSpec, SpectralField, gradient, inverse_transform, mollify

#: refinement of the physical grid for the cubic integrands of the local balance
LOCAL_REFINE = 2.0

DEFAULT_ALPHAS = (0.4, 0.2, 0.1, 0.05, 0.025)


# ------------------------------------------------------------- weighted identity


def _window_arrays(ledger: TimeSeriesLedger, s: float, t: float):
    w = ledger.window(s, t)
    return ledger.t[w], ledger.E[w], ledger.D[w], ledger.G[w]


def _trap(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.trapezoid(y, x)) if len(x) > 1 else 0.0


def _check_alpha_k(alpha: float, K: float):
    if not alpha >= 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")


def h_integral(ledger: TimeSeriesLedger, alpha: float, K: float, s: float, t: float) -> float:
    """``alpha * int_s^t E / (K + D)^(alpha+1) * G dtau``."""
    _check_alpha_k(alpha, K)
    tau, E, D, G = _window_arrays(ledger, s, t)
    return alpha * _trap(E * G / (K + D) ** (alpha + 1.0), tau)


def weighted_identity_terms(ledger: TimeSeriesLedger, alpha: float, K: float, s: float, t: float) -> dict:
    _check_alpha_k(alpha, K)
    tau, E, D, G = _window_arrays(ledger, s, t)
    nu = ledger.viscosity
    h = alpha * _trap(E * G / (K + D) ** (alpha + 1.0), tau)
    diss = 2.0 * nu * _trap(D / (K + D) ** alpha, tau)
    start = E[0] / (K + D[0]) ** alpha
    end = E[-1] / (K + D[-1]) ** alpha
    return {"h": h, "dissipation": diss, "start": start, "end": end, "residual": abs(h + diss - start + end)}


def weighted_identity_residual(ledger: TimeSeriesLedger, alpha: float, K: float, s: float, t: float) -> float:
    """``|h + 2 int D/(K+D)^a - E(s)/(K+D(s))^a + E(t)/(K+D(t))^a|``."""
    return weighted_identity_terms(ledger, alpha, K, s, t)["residual"]


def energy_relation_residual(ledger: TimeSeriesLedger, s: float, t: float, H_estimate: float = 0.0) -> float:
    """``E(t) + 2 nu int_s^t D - E(s) + H``."""
    tau, E, D, _ = _window_arrays(ledger, s, t)
    return float(E[-1] + 2.0 * ledger.viscosity * _trap(D, tau) - E[0] + H_estimate)


def is_degenerate(ledger: TimeSeriesLedger, s: float, t: float) -> bool:
    _, E, _, _ = _window_arrays(ledger, s, t)
    return not abs(E[0] - E[-1]) > 1e-14 * max(abs(E[0]), abs(E[-1]))


def f_factor(ledger: TimeSeriesLedger, alpha: float, K1: float, s: float, t: float) -> float:
    """Mean-value factor ``2 nu int_s^t D/(K1+D)^a / (E(s) - E(t))``."""
    if not alpha >= 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if not K1 >= 0:
        raise ValueError(f"K1 must be non-negative, got {K1}")
    tau, E, D, _ = _window_arrays(ledger, s, t)
    if is_degenerate(ledger, s, t):
        raise DegenerateWindowError(f"E(s) == E(t) on window ({s}, {t}); the mean-value factor is undefined")
    with np.errstate(divide="raise"):
        weight = (K1 + D) ** (-alpha) if alpha > 0 else np.ones_like(D)
    return 2.0 * ledger.viscosity * _trap(D * weight, tau) / (E[0] - E[-1])


# ------------------------------------------------------------- a-priori bounds


@dataclass(frozen=True)
class UniformBound:
    lhs: float
    rhs_shape: float
    ratio: float


def uniform_bound_check(ledger: TimeSeriesLedger, T: float | None = None) -> UniformBound:
    """``(int_0^T (S + Tt)^(1/3))^3`` against ``1/(1 + D(T)) + ||v0||^p``.

    ``p = 6`` in 3D and ``p = 2`` in 2D (the two-dimensional chain closes with
    one power of the energy).
    """
    T = ledger.t[-1] if T is None else T
    tau, E, D, _ = _window_arrays(ledger, ledger.t[0], T)
    w = ledger.window(ledger.t[0], T)
    S, Tt = ledger.S[w], ledger.Tt[w]
    lhs = _trap(np.cbrt(S + Tt), tau) ** 3
    power = 3.0 if ledger.dim == 3 else 1.0
    rhs = 1.0 / (1.0 + D[-1]) + E[0] ** power
    return UniformBound(lhs=lhs, rhs_shape=rhs, ratio=lhs / rhs)


def mu_exponent(q: float) -> float:
    return q / (q - 2.0)


def mu_norm(ledger: TimeSeriesLedger, q: float, T: float | None = None) -> float:
    """``int_0^T ||v||_q^(q/(q-2)) dtau`` for ``q > 6``."""
    if not q > 6:
        raise ValueError(f"mu-norm needs q > 6, got {q}")
    T = ledger.t[-1] if T is None else T
    w = ledger.window(ledger.t[0], T)
    return _trap(ledger.q_norm(q)[w] ** mu_exponent(q), ledger.t[w])


def extrapolate_sup(qs, norms) -> float:
    """Limit of ``||v||_q`` as ``q -> inf`` from a few exponents.

    For a field with a non-degenerate maximum ``log ||v||_q`` behaves like
    ``log L + b/q - c log(q)/q``; the fit is linear in ``(log L, b, c)``.
    With two exponents the log term is dropped.
    """
    qs = np.asarray(qs, dtype=float)
    y = np.asarray(norms, dtype=float)
    if np.all(y == 0):
        return 0.0
    if np.any(y <= 0):
        raise ValueError("norms must be positive to extrapolate")
    cols = [np.ones_like(qs), 1.0 / qs]
    if len(qs) >= 3:
        cols.append(np.log(qs) / qs)
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return float(math.exp(coef[0]))


def linf_limit(ledger: TimeSeriesLedger, qs=None) -> np.ndarray:
    """Per-sample q -> inf extrapolation of the recorded ``Lq`` columns."""
    qs = ledger.q_grid if qs is None else list(qs)
    if len(qs) < 2:
        raise ValueError("need at least two recorded exponents")
    cols = np.stack([ledger.q_norm(q) for q in qs], axis=1)
    return np.array([extrapolate_sup(qs, row) for row in cols])


# ------------------------------------------------------------- local balance


def local_energy_terms(
    ledger: TimeSeriesLedger,
    bump,
    s: float,
    t: float,
    advecting: str = "raw",
) -> dict:
    """Terms of the generalized energy balance with the defect set to zero.

    ``advecting="raw"`` uses ``|v|^2 v . grad phi`` as written for the limit
    equation; ``"mollified"`` uses ``|v|^2 J_m[v] . grad phi``, for which the
    balance is exact for each approximant.
    """
    if isinstance(bump, dict):
        bump = make_bump(bump)
    snaps = ledger.snapshots
    if not snaps or "pressure" not in snaps:
        raise ValueError("local balance needs velocity and pressure snapshots (set snapshot_window)")
    w = ledger.window(s, t)
    times = ledger.t[w]
    st = snaps["t"]
    idx = []
    for tau in times:
        j = int(np.argmin(np.abs(st - tau)))
        if abs(st[j] - tau) > 1e-9 * max(1.0, abs(tau)):
            raise ValueError(f"snapshots missing at t={tau}")
        idx.append(j)
    cfg = ledger.meta["config"]
    grid = GridSpec(**cfg["grid"])
    nu = ledger.viscosity
    moll = MollifierSpec(**cfg["mollifier"])
    cell = grid.volume / (round(grid.n * LOCAL_REFINE) ** grid.dim)

    e_loc, diss, lin, flux = [], [], [], []
    for tau, j in zip(times, idx):
        v = SpectralField(grid, snaps["velocity"][j])
        p = SpectralField(grid, snaps["pressure"][j])
        b = bump.evaluate(grid, float(tau), LOCAL_REFINE)
        vp = inverse_transform(v, LOCAL_REFINE)
        gp = inverse_transform(gradient(v), LOCAL_REFINE)
        pp = inverse_transform(p, LOCAL_REFINE)[0]
        wp = vp if advecting == "raw" else inverse_transform(mollify(v, moll), LOCAL_REFINE)
        v2 = np.sum(vp**2, axis=0)
        e_loc.append(np.sum(v2 * b.phi) * cell)
        diss.append(np.sum(np.sum(gp**2, axis=0) * b.phi) * cell)
        lin.append(np.sum(v2 * (b.phi_t + nu * b.lap)) * cell)
        flux.append(np.sum(v2 * np.sum(wp * b.grad, axis=0) + 2.0 * pp * np.sum(vp * b.grad, axis=0)) * cell)
    e_loc = np.array(e_loc)
    terms = {
        "energy_end": float(e_loc[-1]),
        "energy_start": float(e_loc[0]),
        "dissipation": 2.0 * nu * _trap(np.array(diss), times),
        "linear": _trap(np.array(lin), times),
        "flux": _trap(np.array(flux), times),
    }
    terms["residual"] = (
        terms["energy_end"] + terms["dissipation"] - terms["energy_start"] - terms["linear"] - terms["flux"]
    )
    return terms


def local_energy_residual(ledger: TimeSeriesLedger, bump, s: float, t: float, advecting: str = "raw") -> float:
    return local_energy_terms(ledger, bump, s, t, advecting)["residual"]


# ------------------------------------------------------- backward uniqueness


@dataclass(frozen=True)
class LogConvexityVerdict:
    convex: bool
    enstrophy_positive: bool
    rate: float
    sup_bound: float
    min_margin: float
    min_sigma_curvature: float
    linear_defect: float
    window: tuple


def log_convexity_check(ledger: TimeSeriesLedger, window: tuple | None = None, tol: float = 1e-8) -> LogConvexityVerdict:
    """Convexity of ``log E`` in the reparameterised time ``sigma = exp(h t)``.

    ``h = A^2 / nu`` with ``A`` the largest recorded sup-norm in the window.
    The instantaneous margin is ``E*E'' - E'^2 - h*E'*E`` with ``E' = -2 nu D``
    and ``E'' = -2 nu G``; it must be non-negative.  The discrete check uses
    second divided differences of ``log E`` with respect to ``sigma``.
    """
    if ledger.E[0] == 0.0:
        raise ValueError("initial data vanish: the backward-uniqueness claim is vacuous")
    s, t = (ledger.t[0], ledger.t[-1]) if window is None else window
    w = ledger.window(s, t)
    tau, E, D, G = ledger.t[w], ledger.E[w], ledger.D[w], ledger.G[w]
    nu = ledger.viscosity
    A = float(np.max(ledger.Linf[w]))
    h = A**2 / nu
    e1, e2 = -2.0 * nu * D, -2.0 * nu * G
    margin = E * e2 - e1**2 - h * e1 * E
    scale = np.maximum.reduce([np.abs(E * e2), e1**2, np.abs(h * e1 * E)]) + np.finfo(float).tiny
    rel_margin = float(np.min(margin / scale))

    y = np.log(E)
    sigma = np.exp(h * (tau - tau[0]))
    curv = []
    for j in range(1, len(tau) - 1):
        d1 = (y[j + 1] - y[j]) / (sigma[j + 1] - sigma[j])
        d0 = (y[j] - y[j - 1]) / (sigma[j] - sigma[j - 1])
        curv.append((d1 - d0) / abs(d0 if d0 != 0 else 1.0))
    min_curv = float(min(curv)) if curv else 0.0
    lin = float(np.max(np.abs(np.diff(y, 2)))) if len(y) > 2 else 0.0
    return LogConvexityVerdict(
        convex=bool(rel_margin >= -tol and min_curv >= -1e-6),
        enstrophy_positive=bool(np.all(D > 0)),
        rate=h,
        sup_bound=A,
        min_margin=rel_margin,
        min_sigma_curvature=min_curv,
        linear_defect=lin,
        window=(float(s), float(t)),
    )


# ------------------------------------------------------------- inequality chains


def nonlinear_energy(ledger: TimeSeriesLedger) -> np.ndarray:
    """``||P(J_m[v] . grad v)||^2 = nu G + nu^2 S + Tt`` at every sample."""
    nu = ledger.viscosity
    return nu * ledger.G + nu**2 * ledger.S + ledger.Tt


def nonlinear_chain(ledger: TimeSeriesLedger, c_interp: float | None = None) -> dict:
    """Margins of ``||N||^2 <= |v|_inf^2 D <= c^2 * (interpolation bound)``.

    The interpolation bound is ``S^(1/2) D^(3/2)`` in 3D and
    ``E^(1/2) S^(1/2) D`` in 2D.  The first link uses the recorded sup norm.
    """
    N2 = nonlinear_energy(ledger)
    D, S, E = ledger.D, ledger.S, ledger.E
    link1 = ledger.Linf**2 * D
    shape = np.sqrt(S) * D**1.5 if ledger.dim == 3 else np.sqrt(E * S) * D
    nz = shape > 0
    out = {
        "max_N2_over_sup_bound": float(np.max(N2[link1 > 0] / link1[link1 > 0])) if np.any(link1 > 0) else 0.0,
        "effective_constant": float(np.max(N2[nz] / shape[nz])) if np.any(nz) else 0.0,
    }
    if c_interp is not None:
        bound = c_interp**2 * shape
        out["c_interp"] = c_interp
        out["min_margin"] = float(np.min(bound - N2))
    return out


def planar_defect_chain(ledger: TimeSeriesLedger, alpha: float, K: float, s: float, t: float) -> dict:
    """Terms of the two-dimensional upper bound on the weighted integral.

    ``c`` is measured as ``max (nu G + nu^2 S + Tt) / (E(0) D^2)`` over the
    window.  The chain is ``h <= T2 <= T3 <= T4 <= T5`` with the Hoelder step
    using ``(t - s)^alpha``; the ``(t - s)^(1/alpha)`` variant is reported
    alongside.
    """
    _check_alpha_k(alpha, K)
    tau, E, D, G = _window_arrays(ledger, s, t)
    w = ledger.window(s, t)
    N2 = nonlinear_energy(ledger)[w]
    nu = ledger.viscosity
    E0 = float(ledger.E[0])
    if E0 == 0.0:
        return {"h": 0.0, "c": 0.0, "T2": 0.0, "T3": 0.0, "T4": 0.0, "T4_inverse_exponent": 0.0, "T5": 0.0, "holds": True}
    pos = D > 0
    # nu G <= nu G + nu^2 S + Tt = ||N||^2, so G <= ||N||^2 / nu
    c =float(np.max(N2[pos] / (nu * E0 * D[pos] ** 2))) if np.any(pos) else 0.0
    h = alpha * _trap(E * G / (K + D) ** (alpha + 1.0), tau)
    T2 = alpha * c * E0 * _trap(E * D**2 / (K + D) ** (alpha + 1.0), tau)
    T3 = alpha * c * E0**2 * _trap(D ** (1.0 - alpha), tau)
    intD = _trap(D, tau)
    T4 = alpha * c * E0**2 * (t - s) ** alpha * intD ** (1.0 - alpha)
    T4i = alpha * c * E0**2 * (t - s) ** (1.0 / alpha) * intD ** (1.0 - alpha)
    T5 = alpha * c * E0**2 * (E0 / (2.0 * nu)) ** (1.0 - alpha) * (t - s) ** alpha
    slack = 1e-12 * max(abs(T2), abs(T5), 1e-300)
    holds = h <= T2 + slack and T2 <= T3 + slack and T3 <= T4 + slack and T4 <= T5 + slack
    return {"h": h, "c": c, "T2": T2, "T3": T3, "T4": T4, "T4_inverse_exponent": T4i, "T5": T5, "holds": bool(holds)}


def fd_grad_rate(ledger: TimeSeriesLedger) -> np.ndarray:
    """Centered differences of ``D`` at interior samples (cross-check of ``G``)."""
    t, D = ledger.t, ledger.D
    return (D[2:] - D[:-2]) / (t[2:] - t[:-2])


# ------------------------------------------------------------- config + report


@dataclass(frozen=True)
class DiagnosticsConfig:
    alphas: tuple = DEFAULT_ALPHAS
    K_values: tuple = (1.0,)
    K1_values: tuple = (0.0,)
    #: empty means: pick windows from the ledger's own sample times
    windows: tuple = ()
    q_grid: tuple = (8.0, 16.0, 64.0)
    bump: dict | None = None
    local_window: tuple | None = None
    advecting: str = "raw"
    c_interp: float | None = None
    energy_tol: float = 1e-6
    identity_tol: float = 1e-5
    local_tol: float = 1e-4
    f_tol: float = 1e-5

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas or any(not 0 < a <= 0.5 for a in alphas):
            raise ConfigError("every alpha must lie in (0, 1/2]")
        if any(b >= a for a, b in zip(alphas, alphas[1:])):
            raise ConfigError("the alpha grid must be strictly decreasing")
        if any(not K > 0 for K in self.K_values):
            raise ConfigError("K must be positive")
        if any(not K1 >= 0 for K1 in self.K1_values):
            raise ConfigError("K1 must be non-negative")
        windows = tuple((float(s), float(t)) for s, t in self.windows)
        if any(not s < t for s, t in windows):
            raise ConfigError("every window needs s < t")
        if any(not q > 6 for q in self.q_grid):
            raise ConfigError("mu-norm exponents must exceed 6")
        if self.advecting not in ("raw", "mollified"):
            raise ConfigError("advecting must be 'raw' or 'mollified'")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "K_values", tuple(float(k) for k in self.K_values))
        object.__setattr__(self, "K1_values", tuple(float(k) for k in self.K1_values))
        object.__setattr__(self, "q_grid", tuple(float(q) for q in self.q_grid))
        if self.local_window is not None:
            object.__setattr__(self, "local_window", tuple(float(x) for x in self.local_window))

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsConfig":
        d = {k: v for k, v in d.items() if k != "schema_version"}
        for key in ("alphas", "K_values", "K1_values", "q_grid", "local_window"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        if "windows" in d:
            d["windows"] = tuple(tuple(w) for w in d["windows"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


@dataclass
class DiagnosticsReport:
    run_key: str
    m: float | None
    weighted: list = field(default_factory=list)
    mean_value: list = field(default_factory=list)
    energy_relation: list = field(default_factory=list)
    uniform_bound: dict = field(default_factory=dict)
    mu_norms: list = field(default_factory=list)
    linf: dict = field(default_factory=dict)
    local_balance: dict | None = None
    log_convexity: dict = field(default_factory=dict)
    nonlinear_chain: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self), default=_json_default))

    def save(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "diagnostics.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        for name in ("weighted", "mean_value", "energy_relation", "mu_norms"):
            rows = getattr(self, name)
            if rows:
                (d / f"{name}.csv").write_text(rows_to_csv(rows))
        return d


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def rows_to_csv(rows: list[dict]) -> str:
    keys: list[str] = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def auto_windows(ledger: TimeSeriesLedger) -> tuple:
    """Two adjacent windows on sample instants: tenth-to-half and half-to-end."""
    n = len(ledger)
    if n < 3:
        return ((float(ledger.t[0]), float(ledger.t[-1])),) if n == 2 else ()
    t = ledger.t
    a, b = max(1, n // 10), n // 2
    out = [(float(t[a]), float(t[b]))] if a < b else []
    out.append((float(t[b]), float(t[-1])))
    return tuple(out)


def diagnose(ledger: TimeSeriesLedger, config: DiagnosticsConfig | None = None) -> DiagnosticsReport:
    """Evaluate every identity and inequality of interest on one ledger."""
    config = config or DiagnosticsConfig()
    meta = ledger.meta
    m = meta.get("config", {}).get("mollifier", {}).get("m")
    report = DiagnosticsReport(run_key=meta.get("run_key", ""), m=m)
    E0 = float(ledger.E[0])
    budget = ledger.energy_budget()
    report.budget = {"max_abs": float(np.max(np.abs(budget))), "relative": _rel(np.max(np.abs(budget)), E0)}

    for s, t in config.windows or auto_windows(ledger):
        Es = float(ledger.E[ledger.index_of(s)])
        for K in config.K_values:
            for a in config.alphas:
                terms = weighted_identity_terms(ledger, a, K, s, t)
                row = {
                    "s": s, "t": t, "alpha": a, "K": K,
                    "h": terms["h"],
                    "weighted_identity_residual": terms["residual"],
                    "identity_tol": config.identity_tol * Es,
                    "identity_ok": terms["residual"] <= config.identity_tol * Es,
                }
                if ledger.dim == 2:
                    r4 = planar_defect_chain(ledger, a, K, s, t)
                    row["planar_chain_holds"] = r4["holds"]
                report.weighted.append(row)
        for K1 in config.K1_values:
            for a in (0.0,) + config.alphas:
                try:
                    f = f_factor(ledger, a, K1, s, t)
                    degenerate = False
                except (DegenerateWindowError, FloatingPointError):
                    f, degenerate = None, True
                report.mean_value.append({"s": s, "t": t, "alpha": a, "K1": K1, "f": f, "degenerate": degenerate})
        res = energy_relation_residual(ledger, s, t, 0.0)
        report.energy_relation.append(
            {"s": s, "t": t, "residual": res, "tol": config.energy_tol * E0, "ok": abs(res) <= config.energy_tol * E0}
        )

    est = uniform_bound_check(ledger)
    report.uniform_bound = asdict(est)
    for q in config.q_grid:
        try:
            report.mu_norms.append({"q": q, "mu": mu_exponent(q), "mu_norm": mu_norm(ledger, q)})
        except KeyError:
            report.mu_norms.append({"q": q, "mu": mu_exponent(q), "mu_norm": None})
    if len(ledger.q_grid) >= 2:
        lim = linf_limit(ledger)
        col = ledger.Linf
        nz = col > 0
        err = float(np.max(np.abs(lim[nz] - col[nz]) / col[nz])) if np.any(nz) else 0.0
        report.linf = {"max_relative_deviation": err, "q_grid": ledger.q_grid}
    if E0 > 0:
        report.log_convexity = asdict(log_convexity_check(ledger))
    report.nonlinear_chain = nonlinear_chain(ledger, config.c_interp)
    if config.bump is not None and ledger.snapshots and "pressure" in ledger.snapshots:
        lw = config.local_window or tuple(float(x) for x in (ledger.snapshots["t"][0], ledger.snapshots["t"][-1]))
        terms = local_energy_terms(ledger, config.bump, lw[0], lw[1], config.advecting)
        terms["tol"] = config.local_tol * E0
        terms["ok"] = abs(terms["residual"]) <= config.local_tol * E0
        terms["window"] = list(lw)
        report.local_balance = terms
    return report


def _rel(x: float, scale: float) -> float:
    return float(x / scale) if scale > 0 else float(x)
