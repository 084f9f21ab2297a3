"""Command line: ``bhdephasing scan|point|oracle|plot``.

Exit codes: 0 when every point succeeded, 1 when some points failed,
2 for configuration or usage errors, 3 when ``plot`` finds no series.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, MissingSeries, Unsupported
from .reference_baths import KINDS, OracleBath

EXIT_OK, EXIT_POINT_FAILED, EXIT_CONFIG, EXIT_NO_SERIES = 0, 1, 2, 3

# command-line flags that mirror config keys
_FLAG_KEYS = {
    "mu": "bath.mu", "density": "bath.density", "Ls": "bath.Ls", "n_max": "bath.n_max",
    "g": "impurity.g", "t_max": "time.t_max", "dt": "time.dt", "d_omega": "spectral.d_omega",
    "gamma2_mode": "run.gamma2_mode", "workers": "run.workers", "output": "output.dir",
}


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("--mu", type=float, help="chemical potential mu/U")
    p.add_argument("--density", type=float, help="target filling (constant-density scans)")
    p.add_argument("--Ls", type=int, help="sites per axis")
    p.add_argument("--n-max", dest="n_max", type=int, help="Fock cutoff")
    p.add_argument("--g", type=float, help="impurity coupling g/U")
    p.add_argument("--t-max", dest="t_max", type=float, help="end of the time grid")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--d-omega", dest="d_omega", type=float, help="spectral-density bin width")
    p.add_argument("--gamma2-mode", dest="gamma2_mode", choices=("auto", "direct", "factorized"))
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--output", help="output directory (relative paths honour BHDEPHASING_OUTPUT_ROOT)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. --set bath.auto_n_max=true")
    p.add_argument("--no-resume", action="store_true", help="recompute points with existing records")


def _overrides(args) -> dict:
    out = {}
    for name, key in _FLAG_KEYS.items():
        value = getattr(args, name, None)
        if value is not None:
            out[key] = str(value)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhdephasing",
                                     description="Impurity dephasing in a Bose-Hubbard bath.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="run a scan described by a config file")
    p.add_argument("config", help="flat 'key = value' config file")
    _add_overrides(p)

    p = sub.add_parser("point", help="run a single (2dJ/U, mu/U) point")
    p.add_argument("--hopping", type=float, required=True, help="2dJ/U")
    _add_overrides(p)

    p = sub.add_parser("oracle", help="tabulate reference-bath rates")
    p.add_argument("--kind", choices=KINDS, help="bath kind (omit to run the whole suite)")
    p.add_argument("--d", type=float, default=1)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--rho0", type=float, default=1.0)
    p.add_argument("--U", type=float, default=1.0)
    p.add_argument("--t-max", dest="t_max", type=float, default=50.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--method", default="auto", choices=("auto", "closed", "quadrature", "lattice"))
    p.add_argument("--output", default="runs/oracle")

    p = sub.add_parser("plot", help="render SVG figures of a finished scan")
    p.add_argument("run_dir")
    p.add_argument("--output", help="figure directory (default: RUN_DIR/figures)")
    return parser


def _report(records, index_path) -> int:
    failed = [r for r in records if r.status != "ok"]
    print(f"{len(records) - len(failed)}/{len(records)} points succeeded; index: {index_path}")
    for r in failed:
        print(f"  failed 2dJ/U = {r.two_d_J:.6g}: {r.error}", file=sys.stderr)
    return EXIT_POINT_FAILED if failed else EXIT_OK


def _cmd_scan(args) -> int:
    from .scan import load_config, run_oracle_suite, run_scan

    config = load_config(args.config, _overrides(args))
    if config.scenario == "oracle-suite":
        out = config.output_dir()
        for s in run_oracle_suite(out):
            print(f"{s['kind']:>30} d={s['d']:g}: gamma {s.get('gamma_exponent')}, "
                  f"Gamma {s.get('Gamma_exponent')}")
        return EXIT_OK
    records, index = run_scan(config, resume=not args.no_resume, log=print)
    return _report(records, index)


def _cmd_point(args) -> int:
    from .scan import config_from_mapping, run_scan

    raw = {"scenario": "single-point", "hopping.values": str(args.hopping),
           "output.dir": "runs/point"}
    raw.update(_overrides(args))
    records, index = run_scan(config_from_mapping(raw), resume=not args.no_resume, log=print)
    r = records[0]
    if r.status == "ok":
        print(f"psi = {r.psi:.6g}  n0 = {r.density:.6g}  lambda = {r.lam:.6g}  "
              f"N- = {r.N_minus:.6g}  N+ = {r.N_plus:.6g}  R = {r.R:.6g}")
    return _report(records, index)


def _cmd_oracle(args) -> int:
    from .scan import ScanConfig, run_oracle, run_oracle_suite

    out = ScanConfig(scenario="oracle-suite", output=args.output).output_dir()
    if args.kind is None:
        summaries = run_oracle_suite(out)
    else:
        try:
            bath = OracleBath(args.kind, args.d, args.m, args.J, args.rho0, args.U)
        except (ValueError, Unsupported) as exc:
            raise ConfigError(str(exc)) from None
        t = np.arange(int(round(args.t_max / args.dt)) + 1) * args.dt
        summaries = [run_oracle(bath, t, out, method=args.method)]
    for s in summaries:
        line = f"{s['kind']} d={s['d']:g}: expected {s['expected']}"
        if "gamma_exponent" in s:
            line += f", fitted gamma {s['gamma_exponent']}, Gamma {s['Gamma_exponent']}"
        print(line)
    print(f"written to {out}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plotting import emit_plots

    run_dir = Path(args.run_dir)
    if not (run_dir / "index.json").exists():
        print(f"no scan index in {run_dir}", file=sys.stderr)
        return EXIT_NO_SERIES
    paths = emit_plots(run_dir, args.output)
    if not paths:
        print("scan holds no successful points; nothing to plot")
        return EXIT_NO_SERIES
    for path in paths:
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"scan": _cmd_scan, "point": _cmd_point, "oracle": _cmd_oracle, "plot": _cmd_plot}
    try:
        return handler[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingSeries as exc:
        print(f"missing series: {exc}", file=sys.stderr)
        return EXIT_NO_SERIES


if __name__ == "__main__":
    sys.exit(main())
