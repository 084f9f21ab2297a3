"""SVG figures for scan results.

Output is byte-stable: the SVG id salt is fixed and no creation date is
embedded, so identical records give identical files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import io  # noqa: E402
from .errors import MissingSeries  # noqa: E402

SVG_SALT = "bhdephasing"


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _series(run_dir: Path, record, name: str) -> dict:
    fname = record.files.get(name)
    if not fname:
        raise MissingSeries(f"record at 2dJ/U = {record.two_d_J} has no {name} series")
    return io.read_csv(run_dir / "points" / record.point_hash / fname)


def plot_rate(run_dir, record, path) -> Path:
    """``gamma(t)`` with its one- and two-particle parts and a ``tau_G`` marker."""
    data = _series(Path(run_dir), record, "rates")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(data["t"], data["gamma"], lw=1.0, label=r"$\gamma$")
    ax.plot(data["t"], data["gamma1"], lw=0.8, ls="--", label=r"$\gamma_1$")
    ax.plot(data["t"], data["gamma2"], lw=0.8, ls=":", label=r"$\gamma_2$")
    if record.tau_goldstone:
        ax.axvline(record.tau_goldstone, color="k", ls="--", lw=0.8, label=r"$\tau_G$")
    ax.axhline(0.0, color="0.6", lw=0.5)
    ax.set_xlabel(r"$t\,U/\hbar$")
    ax.set_ylabel(r"$\gamma(t)$")
    ax.set_title(f"2dJ/U = {record.two_d_J:.4g}, mu/U = {record.mu:.4g}")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_spectral_density(run_dir, record, path) -> Path:
    """``J(omega)`` on log axes with the low-frequency power law when one was fitted."""
    run_dir = Path(run_dir)
    data = _series(run_dir, record, "spectral")
    meta = io.read_json((run_dir / "points" / record.point_hash / record.files["spectral"])
                        .with_suffix(".json"))
    fig, ax = plt.subplots(figsize=(6, 4))
    pos = data["J"] > 0
    ax.loglog(data["omega"][pos], data["J"][pos], lw=1.0, label=r"$J(\omega)$")
    fit = meta.get("fit")
    if fit:
        w = np.geomspace(*fit["window"], 20)
        ax.loglog(w, fit["prefactor"] * w ** fit["exponent"], "k--", lw=0.8,
                  label=rf"$\propto\omega^{{{fit['exponent']:.2f}}}$")
    ax.set_xlabel(r"$\omega/U$")
    ax.set_ylabel(r"$J(\omega)$")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_scan(records, key: str, path, *, critical=None, log: bool = False, label=None) -> Path:
    """Scalar record field against ``2dJ/U`` with the critical hopping marked."""
    ok = [r for r in records if r.status == "ok"]
    x = np.array([r.two_d_J for r in ok])
    y = np.array([getattr(r, key) for r in ok], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, "o-", ms=3, lw=1.0)
    if critical is not None:
        ax.axvline(critical, color="k", ls="--", lw=0.8)
    if log:
        ax.set_yscale("log")
    ax.set_xlabel(r"$2dJ/U$")
    ax.set_ylabel(label or key)
    return _save(fig, path)


def emit_plots(run_dir, out_dir=None) -> list[Path]:
    """All figures for a finished scan; returns the written paths (none for an empty scan)."""
    from .scan import load_records

    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir / "figures"
    index, records = load_records(run_dir)
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        return []
    written = []
    for r in ok:
        stem = f"{r.two_d_J:.6g}"
        written.append(plot_rate(run_dir, r, out_dir / f"gamma_{stem}.svg"))
        written.append(plot_spectral_density(run_dir, r, out_dir / f"spectral_{stem}.svg"))
    if len(ok) > 1:
        crit = index.get("critical_hopping")
        written.append(plot_scan(ok, "lam", out_dir / "lambda.svg", critical=crit, log=True,
                                 label=r"$\lambda$"))
        written.append(plot_scan(ok, "R", out_dir / "R.svg", critical=crit, label=r"$R = N_-/N_+$"))
    return written
