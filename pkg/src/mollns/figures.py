"""SVG line plots and summary tables for a sweep directory."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from mollns.diagnostics import mu_norm, rows_to_csv  # noqa: E402
from mollns.ledger import TimeSeriesLedger  # noqa: E402

plt.rcParams["svg.hashsalt"] = "mollns"


def _label(led: TimeSeriesLedger) -> str:
    cfg = led.meta.get("config", {})
    m = cfg.get("mollifier", {}).get("m")
    variant = cfg.get("initial_data", "")
    return f"m={m:g} ({variant})" if m is not None else led.meta.get("run_key", "?")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _series_plot(ledgers, column: str, ylabel: str, path: Path, log: bool = True) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for led in ledgers:
        y = led.column(column)
        ax.plot(led.t, y, label=_label(led))
    if log and all((led.column(column) > 0).all() for led in ledgers):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize="small")
    return _save(fig, path)


def _vs_alpha(rows, value_key, group_keys, path, ylabel, absolute=False) -> Path | None:
    if not rows:
        return None
    first = rows[0]
    sel = [r for r in rows if all(r[k] == first[k] for k in group_keys) and r[value_key] is not None]
    if not sel:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for m in sorted({r["m"] for r in sel}):
        pts = sorted((r["alpha"], r[value_key]) for r in sel if r["m"] == m)
        a = [p[0] for p in pts]
        y = [abs(p[1]) if absolute else p[1] for p in pts]
        ax.plot(a, y, marker="o", label=f"m={m:g}")
    ax.set_xscale("log")
    if absolute and all(r[value_key] != 0 for r in sel):
        ax.set_yscale("log")
    ax.set_xlabel("alpha")
    ax.set_ylabel(ylabel)
    title = ", ".join(f"{k}={first[k]}" for k in group_keys)
    ax.set_title(title, fontsize="small")
    ax.legend(fontsize="small")
    return _save(fig, path)


def write_report(ledgers: list[TimeSeriesLedger], sweep: dict | None, out: str | Path) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = [
        _series_plot(ledgers, "E", "||v||_2^2", out / "energy.svg"),
        _series_plot(ledgers, "D", "||grad v||_2^2", out / "enstrophy.svg"),
    ]
    summary = []
    qs = sorted({q for led in ledgers for q in led.q_grid if q > 6})
    fig, ax = plt.subplots(figsize=(6, 4))
    for led in ledgers:
        row = {
            "run_key": led.meta.get("run_key", ""),
            "label": _label(led),
            "E0": float(led.E[0]),
            "E_final": float(led.E[-1]),
            "budget_residual": float(abs(led.energy_budget()).max()),
        }
        mus = [mu_norm(led, q) for q in qs if q in led.q_grid]
        for q, mu in zip(qs, mus):
            row[f"mu_norm_q{q:g}"] = mu
        summary.append(row)
        if mus:
            ax.plot(qs, mus, marker="o", label=_label(led))
    ax.set_xscale("log")
    ax.set_xlabel("q")
    ax.set_ylabel("int ||v||_q^(q/(q-2)) dt")
    ax.legend(fontsize="small")
    files.append(_save(fig, out / "mu_norms.svg"))

    if sweep is not None:
        h = _vs_alpha(sweep.get("h_table", []), "H", ("variant", "s", "t", "K"), out / "h_vs_alpha.svg", "|H_{alpha,m}|", True)
        f = _vs_alpha(sweep.get("f_table", []), "F", ("variant", "s", "t", "K1"), out / "f_vs_alpha.svg", "F_{alpha,m}")
        files += [p for p in (h, f) if p is not None]
        for variant, c in sweep.get("cauchy", {}).items():
            rows = [{"m": m, **{f"m={m2:g}": v for m2, v in zip(c["m"], row)}} for m, row in zip(c["m"], c["matrix"])]
            p = out / f"cauchy_{variant}.csv"
            p.write_text(rows_to_csv(rows))
            files.append(p)
    p = out / "summary.csv"
    p.write_text(rows_to_csv(summary))
    files.append(p)
    return files
