"""Declarative scans over the phase diagram.

A scan configuration is a flat list of dotted ``key = value`` lines::

    scenario = edge-path
    hopping.start = 0.06
    hopping.stop = 0.14
    hopping.num = 9
    bath.Ls = 64
    output.dir = runs/edge

Every point runs ground state, spectrum, weights, rates, echo and BLP flows,
writes its series under ``points/<hash>/`` and a record JSON; the scan index
lists the records in hopping order. Points whose record already carries the
same config and point hash are not recomputed.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .correlators import (compute_rates, compute_weights, fit_low_frequency, spectral_density,
                          time_grid)
from .errors import ConfigError, DephasingError, NonPositive, UnderTruncated, Unsupported
from .excitations import compute_spectrum
from .model import BathParams, adequate_n_max, find_mu_for_density, mott_boundary, solve_ground_state
from .open_system import blp_measures, loschmidt_echo
from .reference_baths import (OracleBath, asymptotic_exponent, expected_exponents, oracle_Gamma,
                              oracle_gamma)

SCENARIOS = ("edge-path", "tip-path", "constant-density", "single-point", "oracle-suite")
PINNED_MU = {"edge-path": 0.8, "tip-path": math.sqrt(2) - 1}
OUTPUT_ROOT_ENV = "BHDEPHASING_OUTPUT_ROOT"
#: rates are judged non-negative only after this initial transient
TRANSIENT = 20.0


@dataclass(frozen=True)
class ScanConfig:
    """Everything that defines a scan; ``output``/``workers`` do not affect results."""
    scenario: str = "single-point"
    hoppings: tuple = ()
    mu: float | None = None
    density: float | None = None
    d: int = 2
    Ls: int = 64
    n_max: int = 6
    auto_n_max: bool = False
    g: float = 1e-3
    t_max: float = 200.0
    dt: float = 0.01
    d_omega: float = 0.005
    gamma2_mode: str = "auto"
    output: str = "runs/scan"
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.scenario == "constant-density":
            if self.density is None:
                raise ConfigError("constant-density scans need bath.density")
        elif self.scenario != "oracle-suite" and self.chemical_potential is None:
            raise ConfigError(f"{self.scenario} scans need bath.mu")
        if self.scenario != "oracle-suite" and not self.hoppings:
            raise ConfigError("no hopping values given")
        if self.gamma2_mode not in ("auto", "direct", "factorized"):
            raise ConfigError(f"unknown gamma2 mode {self.gamma2_mode!r}")
        if self.workers < 1:
            raise ConfigError("run.workers must be at least 1")
        if not (self.t_max > 0 and self.dt > 0 and self.d_omega > 0):
            raise ConfigError("time and frequency steps must be positive")

    @property
    def chemical_potential(self) -> float | None:
        if self.mu is not None:
            return float(self.mu)
        return PINNED_MU.get(self.scenario)

    def physics(self) -> dict:
        skip = {"output", "workers"}
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}
        out["hoppings"] = [float(x) for x in self.hoppings]
        out["mu"] = self.chemical_potential
        return out

    @property
    def config_hash(self) -> str:
        return _digest(self.physics())

    def output_dir(self) -> Path:
        path = Path(self.output)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not path.is_absolute():
            path = Path(root) / path
        return path

    def critical_hopping(self) -> float | None:
        mu = self.chemical_potential
        if self.scenario == "constant-density" or mu is None or not 0 < mu < 1:
            return None
        return mott_boundary(mu, d=self.d)


def _digest(payload) -> str:
    text = json.dumps(payload, sort_keys=True, default=float)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- config parsing ----------------------------------------------------------------

_KEYS = {
    "scenario": ("scenario", str),
    "bath.mu": ("mu", float),
    "bath.density": ("density", float),
    "bath.d": ("d", int),
    "bath.Ls": ("Ls", int),
    "bath.n_max": ("n_max", int),
    "bath.auto_n_max": ("auto_n_max", "bool"),
    "impurity.g": ("g", float),
    "time.t_max": ("t_max", float),
    "time.dt": ("dt", float),
    "spectral.d_omega": ("d_omega", float),
    "run.gamma2_mode": ("gamma2_mode", str),
    "run.workers": ("workers", int),
    "output.dir": ("output", str),
}
_HOPPING_KEYS = ("hopping.values", "hopping.start", "hopping.stop", "hopping.num")


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Returns raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _convert(key, value, kind):
    try:
        if kind == "bool":
            low = str(value).lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {value!r}") from None


def _hoppings(raw: dict) -> tuple:
    if "hopping.values" in raw:
        if any(k in raw for k in _HOPPING_KEYS[1:]):
            raise ConfigError("give either hopping.values or hopping.start/stop/num")
        return tuple(_convert("hopping.values", v, float)
                     for v in str(raw["hopping.values"]).split(",") if v.strip())
    present = [k for k in _HOPPING_KEYS[1:] if k in raw]
    if not present:
        return ()
    if len(present) != 3:
        raise ConfigError("hopping.start, hopping.stop and hopping.num go together")
    start = _convert("hopping.start", raw["hopping.start"], float)
    stop = _convert("hopping.stop", raw["hopping.stop"], float)
    num = _convert("hopping.num", raw["hopping.num"], int)
    return tuple(float(x) for x in np.linspace(start, stop, num))


def config_from_mapping(raw: dict) -> ScanConfig:
    unknown = set(raw) - set(_KEYS) - set(_HOPPING_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    kw = {}
    for key, value in raw.items():
        if key in _KEYS:
            name, kind = _KEYS[key]
            kw[name] = _convert(key, value, kind)
    kw["hoppings"] = _hoppings(raw)
    return ScanConfig(**kw)


def load_config(path, overrides: dict | None = None) -> ScanConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw = parse_config_text(text)
    raw.update(overrides or {})
    return config_from_mapping(raw)


# -- records -----------------------------------------------------------------------

@dataclass
class ScanRecord:
    """Summary of one scan point plus the paths of its series files."""
    two_d_J: float
    mu: float
    status: str = "ok"
    error: str = ""
    psi: float = float("nan")
    density: float = float("nan")
    n_max: int = 0
    gaps: list = field(default_factory=list)
    tau_goldstone: float | None = None
    recurrence_time: float | None = None
    lam: float = float("nan")
    eta: float | None = None
    plateau_drift: float | None = None
    min_late_gamma: float = float("nan")
    decoherence_ratio: float = float("nan")
    low_frequency_exponent: float | None = None
    N_minus: float = float("nan")
    N_plus: float = float("nan")
    R: float = float("nan")
    telescoping_residual: float = float("nan")
    files: dict = field(default_factory=dict)
    config_hash: str = ""
    point_hash: str = ""
    timing: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: dict) -> "ScanRecord":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in payload.items() if k in names})


def window_average_drift(t, Gamma, *, fraction: float = 0.25) -> tuple[float, float]:
    """Average rate over the last ``fraction`` of the window and the relative change
    between the averages over its two halves (from differences of ``Gamma``)."""
    t = np.asarray(t)
    G = np.asarray(Gamma)
    t1 = t[-1]
    t0 = t1 - fraction * (t1 - t[0])
    i0, im = np.searchsorted(t, [t0 - 1e-9, 0.5 * (t0 + t1) - 1e-9])
    first = (G[im] - G[i0]) / (t[im] - t[i0])
    second = (G[-1] - G[im]) / (t[-1] - t[im])
    eta = (G[-1] - G[i0]) / (t[-1] - t[i0])
    drift = abs(first - second) / abs(eta) if eta != 0 else math.inf
    return float(eta), float(drift)


def point_params(config: ScanConfig, two_d_J: float) -> BathParams:
    base = dict(d=config.d, Ls=config.Ls, n_max=config.n_max, g=config.g)
    if config.scenario == "constant-density":
        p = BathParams.from_hopping(two_d_J, 0.0, **base)
        while True:
            try:
                p = p.replace(mu=find_mu_for_density(p, config.density).mu)
                break
            except UnderTruncated:
                if not config.auto_n_max or p.n_max >= 64:
                    raise
                p = p.replace(n_max=p.n_max + 2)
    else:
        p = BathParams.from_hopping(two_d_J, config.chemical_potential, **base)
    if config.auto_n_max:
        p = adequate_n_max(p)
    return p


def _point_hash(config: ScanConfig, two_d_J: float) -> str:
    payload = config.physics()
    payload.pop("hoppings")
    payload["two_d_J"] = float(two_d_J)
    return _digest(payload)


def run_point(config: ScanConfig, two_d_J: float, directory) -> ScanRecord:
    """Full pipeline for one hopping; failures are captured in the record."""
    directory = Path(directory)
    clock = time.perf_counter
    start = clock()
    rec = ScanRecord(two_d_J=float(two_d_J), mu=float("nan"), config_hash=config.config_hash,
                     point_hash=_point_hash(config, two_d_J))
    try:
        p = point_params(config, two_d_J)
        rec.mu, rec.n_max = p.mu, p.n_max
        state = solve_ground_state(p)
        rec.psi, rec.density = state.psi, state.density
        spectrum = compute_spectrum(state)
        origin = spectrum.index_of((0,) * p.d)
        rec.gaps = [float(x) for x in spectrum.omega[origin, :2]]
        if state.is_superfluid:
            rec.tau_goldstone = spectrum.tau_goldstone
            rec.recurrence_time = spectrum.recurrence_time()
        t_setup = clock()
        weights = compute_weights(spectrum)
        t = time_grid(config.t_max, config.dt)
        series = compute_rates(weights, t, gamma2_mode=config.gamma2_mode)
        t_rates = clock()
        rec.lam = series.meta["lambda"]
        late = t >= min(TRANSIENT, 0.5 * t[-1])
        rec.min_late_gamma = float(series.gamma[late].min())
        rec.decoherence_ratio = float(abs(series.Gamma2[-1]) / series.Gamma1[-1]) \
            if series.Gamma1[-1] > 0 else math.inf
        L = loschmidt_echo(series.Gamma, p.g)
        report = blp_measures(t, series.gamma, L, p.g)
        rec.N_minus, rec.N_plus, rec.R = report.N_minus, report.N_plus, report.R
        rec.telescoping_residual = report.telescoping_residual()
        if report.R == 0 and rec.min_late_gamma >= 0:
            rec.eta, rec.plateau_drift = window_average_drift(t, series.Gamma)
        sd = spectral_density(weights, config.d_omega)
        try:
            fit = fit_low_frequency(sd)
            rec.low_frequency_exponent = fit.exponent
        except ValueError:
            fit = None
        rec.files = {
            "rates": str(io.write_rate_series(directory / "rates.csv", series).name),
            "spectral": str(io.write_spectral_density(directory / "spectral.csv", sd, fit).name),
            "echo": str(io.write_echo(directory / "echo.csv", t, L).name),
            "report": str(io.write_json(directory / "report.json", report.as_dict()).name),
        }
        rec.timing = {"setup": t_setup - start, "rates": t_rates - t_setup, "total": clock() - start}
    except DephasingError as exc:
        rec.status, rec.error = "failed", f"{type(exc).__name__}: {exc}"
        rec.timing = {"total": clock() - start}
    io.write_json(directory / "record.json", rec.to_json())
    return rec


def _point_task(args):
    config, two_d_J, directory = args
    return run_point(config, two_d_J, directory)


def _cached(directory: Path, config: ScanConfig, two_d_J: float) -> ScanRecord | None:
    path = directory / "record.json"
    if not path.exists():
        return None
    try:
        rec = ScanRecord.from_json(io.read_json(path))
    except (OSError, ValueError, TypeError):
        return None
    if rec.status != "ok" or rec.config_hash != config.config_hash:
        return None
    if rec.point_hash != _point_hash(config, two_d_J):
        return None
    if not all((directory / name).exists() for name in rec.files.values()):
        return None
    return rec


def run_scan(config: ScanConfig, *, resume: bool = True, log=None) -> tuple[list[ScanRecord], Path]:
    """Run every hopping of ``config`` and write ``index.json`` to the output directory."""
    if config.scenario == "oracle-suite":
        raise ConfigError("oracle-suite runs through the 'oracle' command")
    out = config.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "config.json", {**config.physics(), "config_hash": config.config_hash})
    hops = sorted(float(x) for x in config.hoppings)
    dirs = [out / "points" / _point_hash(config, x) for x in hops]
    records: list[ScanRecord | None] = [None] * len(hops)
    todo = []
    for i, (x, dirpath) in enumerate(zip(hops, dirs)):
        cached = _cached(dirpath, config, x) if resume else None
        if cached is not None:
            records[i] = cached
            if log:
                log(f"2dJ/U = {x:.6g}: up to date")
        else:
            todo.append(i)
    tasks = [(config, hops[i], dirs[i]) for i in todo]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_point_task, tasks))
    else:
        results = [_point_task(task) for task in tasks]
    for i, rec in zip(todo, results):
        records[i] = rec
        if log:
            state = "ok" if rec.status == "ok" else f"FAILED ({rec.error})"
            log(f"2dJ/U = {rec.two_d_J:.6g}: {state}")
    index = {
        "scenario": config.scenario,
        "config_hash": config.config_hash,
        "critical_hopping": config.critical_hopping(),
        "points": [{"two_d_J": r.two_d_J, "status": r.status,
                    "record": str(Path("points") / r.point_hash / "record.json")} for r in records],
    }
    index_path = io.write_json(out / "index.json", index)
    return list(records), index_path


def load_records(run_dir) -> tuple[dict, list[ScanRecord]]:
    run_dir = Path(run_dir)
    index = io.read_json(run_dir / "index.json")
    recs = [ScanRecord.from_json(io.read_json(run_dir / p["record"])) for p in index["points"]]
    return index, recs


def single_point_config(two_d_J: float, mu: float, **kw) -> ScanConfig:
    return replace(ScanConfig(scenario="single-point", hoppings=(two_d_J,), mu=mu), **kw)


# -- reference baths ----------------------------------------------------------------

#: (kind, d) pairs run by the oracle suite, with the windows used for exponent fits
ORACLE_SUITE = (("free-continuum", 1), ("free-continuum", 2), ("free-continuum", 3),
                ("free-lattice", 1), ("weakly-interacting-continuum", 1),
                ("weakly-interacting-continuum", 2))


def run_oracle(bath: OracleBath, t, directory, *, window=None, method: str = "auto") -> dict:
    """Tabulate ``gamma`` and ``Gamma`` of a reference bath and fit their late-time powers."""
    directory = Path(directory)
    t = np.asarray(t, dtype=float)
    gamma = oracle_gamma(bath, t, method=method)
    try:
        Gamma = oracle_Gamma(bath, t, method=method)
    except Unsupported:
        Gamma = oracle_Gamma(bath, t, method="quadrature")
    stem = f"{bath.kind}-d{bath.d:g}"
    io.write_csv(directory / f"{stem}.csv", {"t": t, "gamma": gamma, "Gamma": Gamma})
    summary = {"kind": bath.kind, "d": bath.d, "m": bath.m, "J": bath.J, "rho0": bath.rho0, "U": bath.U}
    try:
        summary["expected"] = expected_exponents(bath)
    except Unsupported:
        summary["expected"] = None
    if window is not None:
        for name, series in (("gamma", gamma), ("Gamma", Gamma)):
            try:
                summary[f"{name}_exponent"] = asymptotic_exponent(t, series, window).exponent
            except NonPositive as exc:
                summary[f"{name}_exponent"] = None
                summary[f"{name}_note"] = str(exc)
    io.write_json(directory / f"{stem}.json", summary)
    return summary


def run_oracle_suite(directory, *, window=(10.0, 100.0)) -> list[dict]:
    t = np.geomspace(1.0, window[1], 40)
    return [run_oracle(OracleBath(kind, d), t, directory, window=window) for kind, d in ORACLE_SUITE]
