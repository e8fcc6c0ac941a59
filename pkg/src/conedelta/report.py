"""Serializable run reports (CSV, JSON and two-column plot data)."""
from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.15g"


def _jsonable(x):
    if isinstance(x, Fraction):
        return {"fraction": f"{x.numerator}/{x.denominator}"}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        x = float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return {"float": repr(x)}
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _restore(x):
    if isinstance(x, dict):
        if set(x) == {"fraction"}:
            return Fraction(x["fraction"])
        if set(x) == {"float"}:
            return float(x["float"])
        return {k: _restore(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_restore(v) for v in x]
    return x


def _cell(v):
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def versions() -> dict:
    import scipy

    try:
        import numba

        nb = numba.__version__
    except ImportError:  # pragma: no cover
        nb = None
    from . import __version__

    return {"conedelta": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": nb}


@dataclass
class SpectralReport:
    """Everything a run produced.

    ``rows`` is the main table (one dict per row, all with the keys in
    ``columns``); ``sections`` holds nested results (eigen report,
    certificate, bounds, defects); ``checks`` maps a check name to
    ``{"value", "target", "passed"}``.
    """

    command: str
    config: dict
    columns: list
    rows: list
    sections: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add_check(self, name: str, value, target: str, passed: bool) -> None:
        self.checks[name] = {"value": value, "target": target, "passed": bool(passed)}

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    # ---- JSON
    def to_dict(self) -> dict:
        return _jsonable({"command": self.command, "config": self.config, "columns": self.columns,
                          "rows": self.rows, "sections": self.sections, "checks": self.checks,
                          "provenance": self.provenance})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralReport":
        d = _restore(d)
        return cls(d["command"], d["config"], d["columns"], d["rows"], d.get("sections", {}),
                   d.get("checks", {}), d.get("provenance", {}))

    @classmethod
    def from_json(cls, text: str) -> "SpectralReport":
        return cls.from_dict(json.loads(text))

    # ---- CSV
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def plot_data(self, x: str, y: str) -> str:
        lines = [f"# {x} {y}"]
        for row in self.rows:
            if row.get(x) is None or row.get(y) is None:
                continue
            lines.append(f"{_cell(float(row[x]))} {_cell(float(row[y]))}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir, name: str, fmt: str = "csv", plot: tuple | None = None) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        if fmt == "csv":
            p = out / f"{name}.csv"
            p.write_text(self.to_csv())
        else:
            p = out / f"{name}.json"
            p.write_text(self.to_json())
        paths.append(p)
        if plot is not None:
            p = out / f"{name}.dat"
            p.write_text(self.plot_data(*plot))
            paths.append(p)
        return paths
