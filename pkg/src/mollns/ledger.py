"""Sampled scalar histories of a run and their on-disk format.

Columns: ``t, E, D, S, Tt, G`` (energy, enstrophy ``||grad v||^2``,
``||P Lap v||^2``, ``||v_t||^2``, instantaneous ``d/dt ||grad v||^2``), one
``Lq<q>`` column per configured exponent and ``Linf``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BASE_COLUMNS = ("t", "E", "D", "S", "Tt", "G")

#: relative tolerance when matching a requested time to a sample time
TIME_MATCH_RTOL = 1e-9


@dataclass
class TimeSeriesLedger:
    columns: list[str]
    data: np.ndarray
    meta: dict = field(default_factory=dict)
    snapshots: dict | None = None

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.shape[1] != len(self.columns):
            raise ValueError("data width does not match the column list")
        t = self.t
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"ledger has no column {name!r}") from None

    def __getattr__(self, name):
        if name in BASE_COLUMNS or name == "Linf":
            return self.column(name)
        raise AttributeError(name)

    @property
    def q_grid(self) -> list[float]:
        return [float(c[2:]) for c in self.columns if c.startswith("Lq")]

    def q_norm(self, q: float) -> np.ndarray:
        for c in self.columns:
            if c.startswith("Lq") and float(c[2:]) == float(q):
                return self.column(c)
        raise KeyError(f"ledger has no L^{q:g} column; recorded exponents are {self.q_grid}")

    @property
    def viscosity(self) -> float:
        return float(self.meta.get("config", {}).get("viscosity", 1.0))

    @property
    def dim(self) -> int:
        return int(self.meta.get("config", {}).get("grid", {}).get("dim", 3))

    # ---------------------------------------------------------- windows

    def index_of(self, time: float) -> int:
        t = self.t
        j = int(np.argmin(np.abs(t - time)))
        scale = max(abs(time), t[-1] - t[0], 1.0)
        if abs(t[j] - time) > TIME_MATCH_RTOL * scale:
            raise ValueError(
                f"time {time} is not a sample time (sampled range [{t[0]}, {t[-1]}]); "
                "windows must use recorded sample instants"
            )
        return j

    def window(self, s: float, t: float) -> slice:
        if not s <= t:
            raise ValueError(f"window start {s} exceeds end {t}")
        return slice(self.index_of(s), self.index_of(t) + 1)

    def integrate(self, values: np.ndarray, s: float | None = None, t: float | None = None) -> float:
        """Composite trapezoid of ``values`` (aligned with the samples) over ``[s, t]``."""
        s = self.t[0] if s is None else s
        t = self.t[-1] if t is None else t
        w = self.window(s, t)
        return float(np.trapezoid(np.asarray(values)[w], self.t[w]))

    def cumulative(self, values: np.ndarray) -> np.ndarray:
        """Running trapezoid integral from the first sample."""
        v = np.asarray(values)
        dt = np.diff(self.t)
        return np.concatenate([[0.0], np.cumsum(0.5 * dt * (v[1:] + v[:-1]))])

    def energy_budget(self) -> np.ndarray:
        """``E(t) - E(0) + 2 nu int_0^t D`` at every sample."""
        return self.E - self.E[0] + 2.0 * self.viscosity * self.cumulative(self.D)

    # ---------------------------------------------------------- I/O

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.data:
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def save(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "ledger.csv").write_text(self.to_csv_text())
        (d / "meta.json").write_text(json.dumps(self.meta, indent=2, sort_keys=True))
        if self.snapshots:
            np.savez(d / "snapshots.npz", **self.snapshots)
        return d

    @classmethod
    def load(cls, path: str | Path, with_snapshots: bool = True) -> "TimeSeriesLedger":
        """Load from a run directory or directly from a ``ledger.csv``."""
        p = Path(path)
        d = p if p.is_dir() else p.parent
        csv_path = d / "ledger.csv" if p.is_dir() else p
        if not csv_path.exists():
            raise FileNotFoundError(f"no ledger at {csv_path}")
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        columns, body = rows[0], rows[1:]
        data = np.array([[float(x) for x in r] for r in body]) if body else np.zeros((0, len(columns)))
        meta_path = d / "meta.json"
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        snaps = None
        snap_path = d / "snapshots.npz"
        if with_snapshots and snap_path.exists():
            with np.load(snap_path) as z:
                snaps = {k: z[k] for k in z.files}
        return cls(columns=columns, data=data, meta=meta, snapshots=snaps)
