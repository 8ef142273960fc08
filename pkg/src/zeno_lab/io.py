"""Deterministic CSV / JSON emission.

Floats are written with 17 significant digits so files can be diffed exactly.
Data files carry no wall-clock information; that lives in ``manifest.json``.
"""

from __future__ import annotations

import datetime
import json
import math
import os
import platform
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analysis import RateSeries, SweepResult, TransitionReport
from .dynamics import SurvivalSeries


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def _json_value(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        x = float(value)
        return x if math.isfinite(x) else None
    if isinstance(value, np.ndarray):
        return [_json_value(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


@dataclass
class Table:
    columns: Sequence[str]
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, expected {len(self.columns)}")
        self.rows.append(values)

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_records(self) -> list[dict]:
        return [dict(zip(self.columns, (_json_value(v) for v in row))) for row in self.rows]


def write_table(table: Table, directory: str, stem: str, fmt_name: str = "csv") -> str:
    os.makedirs(directory, exist_ok=True)
    if fmt_name == "json":
        path = os.path.join(directory, stem + ".json")
        write_json(table.to_records(), path)
    else:
        path = os.path.join(directory, stem + ".csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(table.to_csv())
    return path


def write_json(obj: Any, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_value(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def survival_table(series: SurvivalSeries, rates: RateSeries) -> Table:
    """Columns ``n, t, P, lambda_n, w_n``; the rate columns are empty on the last row."""
    table = Table(["n", "t", "P", "lambda_n", "w_n"])
    n_rates = len(rates.lambdas)
    for n, (t, p) in enumerate(zip(series.times, series.probs)):
        lam = rates.lambdas[n] if n < n_rates else None
        w = rates.scaled[n] if n < n_rates else None
        table.add(n, t, p, lam, w)
    return table


def sweep_table(sweep: SweepResult) -> Table:
    table = Table(["tau", "N", "Lambda"])
    for i, n in enumerate(sweep.n_list):
        for j, tau in enumerate(sweep.taus):
            table.add(tau, n, sweep.Lambda[i, j])
    return table


def transitions_doc(reports: dict[int, TransitionReport]) -> dict:
    doc = {}
    for n in sorted(reports):
        r = reports[n]
        doc[str(n)] = {
            "transitions": [{"tau_c": t.tau_c, "direction": t.direction} for t in r.transitions],
            "segments": [{"from": a, "to": b, "label": lab} for a, b, lab in r.segments],
            "flat": r.flat,
        }
    return doc


def versions() -> dict:
    import scipy

    return {"zeno_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(directory: str, command: str, config: dict, extra: dict | None = None) -> str:
    doc = {
        "command": command,
        "config": config,
        "versions": versions(),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    doc.update(extra or {})
    return write_json(doc, os.path.join(directory, "manifest.json"))
