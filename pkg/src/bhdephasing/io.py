"""Bit-stable CSV and JSON artifacts.

Floats are written with 17 significant digits so that a round trip through
text reproduces every float64 exactly; lines end in LF on every platform.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import MissingSeries


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def write_csv(path, columns: dict) -> Path:
    """Write equal-length named columns with a header row."""
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float).ravel() for n in names]
    if len({len(c) for c in data}) > 1:
        raise ValueError("columns differ in length")
    lines = [",".join(names)]
    lines.extend(",".join(_fmt(v) for v in row) for row in zip(*data))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingSeries(f"series file {path} not found")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: values[:, i] for i, name in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return path


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_rate_series(path, series) -> Path:
    """``t, gamma, gamma1, gamma2, Gamma`` with a sibling ``.json`` metadata file."""
    path = Path(path)
    write_csv(path, {"t": series.t, "gamma": series.gamma, "gamma1": series.gamma1,
                     "gamma2": series.gamma2, "Gamma": series.Gamma})
    write_json(path.with_suffix(".json"), {"columns": ["t", "gamma", "gamma1", "gamma2", "Gamma"],
                                           "dt": series.dt, **series.meta})
    return path


def write_spectral_density(path, sd, fit=None) -> Path:
    path = Path(path)
    write_csv(path, {"omega": sd.centers, "J": sd.values})
    meta = {"columns": ["omega", "J"], "d_omega": sd.width}
    if fit is not None:
        meta["fit"] = {"exponent": fit.exponent, "stderr": fit.stderr,
                       "prefactor": fit.prefactor, "window": list(fit.window)}
    write_json(path.with_suffix(".json"), meta)
    return path


def write_echo(path, t, L) -> Path:
    L = np.asarray(L, dtype=float)
    return write_csv(path, {"t": t, "L": L, "sqrtL": np.sqrt(L)})
