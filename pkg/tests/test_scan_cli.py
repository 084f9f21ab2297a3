import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhdephasing import io
from bhdephasing.cli import main
from bhdephasing.errors import ConfigError, MissingSeries
from bhdephasing.plotting import emit_plots
from bhdephasing.scan import (ScanConfig, ScanRecord, load_config, load_records, parse_config_text,
                              run_oracle_suite, run_scan, window_average_drift)

SMALL = dict(Ls=8, n_max=8, t_max=10.0)


def _write(tmp_path, text, name="scan.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- config ---------------------------------------------------------------------------

def test_flat_config_with_comments_and_ranges(tmp_path):
    cfg = load_config(_write(tmp_path, """
        # edge path at desk scale
        scenario = edge-path
        hopping.start = 0.06   # inclusive
        hopping.stop = 0.14
        hopping.num = 5
        bath.Ls = 32
        bath.auto_n_max = yes
        output.dir = runs/edge
    """))
    assert cfg.scenario == "edge-path" and cfg.Ls == 32 and cfg.auto_n_max
    assert cfg.hoppings == pytest.approx((0.06, 0.08, 0.1, 0.12, 0.14))
    assert cfg.chemical_potential == 0.8
    assert cfg.critical_hopping() == pytest.approx(0.0889, abs=5e-4)


def test_tip_path_pins_and_overrides_chemical_potential():
    assert ScanConfig("tip-path", (0.1,)).chemical_potential == pytest.approx(math.sqrt(2) - 1)
    assert ScanConfig("tip-path", (0.1,), mu=0.3).chemical_potential == 0.3


@pytest.mark.parametrize("text", [
    "scenario = edge-path\nhopping.values = 0.1\nbath.colour = red",
    "scenario = edge-path\nhopping.values = 0.1\nbath.Ls = sixty",
    "scenario = edge-path\nhopping.values = 0.1\nhopping.start = 0.1",
    "scenario = edge-path\nhopping.start = 0.1\nhopping.stop = 0.2",
    "scenario = edge-path",
    "scenario = constant-density\nhopping.values = 0.1",
    "scenario = single-point\nhopping.values = 0.1",
    "scenario = wormhole\nhopping.values = 0.1\nbath.mu = 0.5",
    "scenario = edge-path\nhopping.values = 0.1\nrun.gamma2_mode = guess",
    "scenario = edge-path\nscenario = tip-path",
    "just some words",
])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


def test_config_hash_ignores_output_and_workers():
    a = ScanConfig("edge-path", (0.1,), output="a", workers=1)
    b = ScanConfig("edge-path", (0.1,), output="b", workers=3)
    c = ScanConfig("edge-path", (0.1,), Ls=32)
    assert a.config_hash == b.config_hash != c.config_hash


def test_parse_keeps_raw_strings():
    assert parse_config_text("a.b = 1, 2 # c\n\n") == {"a.b": "1, 2"}


# -- csv / json -----------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(values=st.lists(st.floats(allow_nan=False), min_size=1, max_size=20))
def test_csv_round_trip_is_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "x.csv"
    io.write_csv(path, {"x": values, "y": values[::-1]})
    back = io.read_csv(path)
    assert np.array_equal(back["x"], np.array(values, dtype=float))
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.startswith(b"x,y\n") and raw.endswith(b"\n")


def test_csv_rejects_ragged_columns(tmp_path):
    with pytest.raises(ValueError):
        io.write_csv(tmp_path / "x.csv", {"a": [1, 2], "b": [1]})
    with pytest.raises(MissingSeries):
        io.read_csv(tmp_path / "nothing.csv")


def test_window_average_drift_of_linear_decoherence():
    t = np.linspace(0, 200, 20001)
    eta, drift = window_average_drift(t, 0.3 * t)
    assert eta == pytest.approx(0.3) and drift < 1e-12
    # gamma = 0.3 + 1e-4 t: half-window means at t = 162.5 and 187.5
    eta, drift = window_average_drift(t, 0.3 * t + 0.01 * t ** 2 / 200)
    assert eta == pytest.approx(0.3175) and drift == pytest.approx(0.0025 / 0.3175)


# -- scans ----------------------------------------------------------------------------

def test_scan_is_deterministic_and_resumable(tmp_path):
    cfg = ScanConfig("tip-path", (0.12, 0.3), output=str(tmp_path / "a"), **SMALL)
    recs, index = run_scan(cfg)
    assert [r.status for r in recs] == ["ok", "ok"]
    assert recs[0].psi == 0 and recs[1].psi > 0
    assert all(abs(r.telescoping_residual) < 1e-10 for r in recs)
    other = ScanConfig("tip-path", (0.3, 0.12), output=str(tmp_path / "b"), workers=2, **SMALL)
    run_scan(other)
    for r in recs:
        for name in r.files.values():
            if name.endswith(".csv"):
                a = (tmp_path / "a" / "points" / r.point_hash / name).read_bytes()
                b = (tmp_path / "b" / "points" / r.point_hash / name).read_bytes()
                assert a == b
    log = []
    again, _ = run_scan(cfg, log=log.append)
    assert all("up to date" in line for line in log)
    assert [r.timing for r in again] == [r.timing for r in recs]
    index_payload, loaded = load_records(tmp_path / "a")
    assert index_payload["config_hash"] == cfg.config_hash
    assert loaded[1].R == pytest.approx(recs[1].R)


def test_changed_physics_recomputes(tmp_path):
    cfg = ScanConfig("tip-path", (0.3,), output=str(tmp_path), **SMALL)
    first, _ = run_scan(cfg)
    log = []
    second, _ = run_scan(ScanConfig("tip-path", (0.3,), output=str(tmp_path), g=2e-3, **SMALL),
                         log=log.append)
    assert "up to date" not in log[0]
    assert second[0].point_hash != first[0].point_hash


def test_output_root_environment_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("BHDEPHASING_OUTPUT_ROOT", str(tmp_path))
    _, index = run_scan(ScanConfig("tip-path", (0.3,), output="rel", **SMALL))
    assert index == tmp_path / "rel" / "index.json"


def test_failed_points_are_recorded_and_skipped(tmp_path):
    # n_max = 4 truncates the deep superfluid; the shallow point still runs
    cfg = ScanConfig("tip-path", (0.05, 2.0), output=str(tmp_path), Ls=8, n_max=4, t_max=5.0)
    recs, _ = run_scan(cfg)
    assert recs[0].status == "ok"
    assert recs[1].status == "failed" and "UnderTruncated" in recs[1].error


def test_constant_density_scan_slows_down_towards_hard_core(tmp_path):
    cfg = ScanConfig("constant-density", (0.2, 0.8), density=0.6, output=str(tmp_path),
                     Ls=8, t_max=10.0, auto_n_max=True)
    recs, _ = run_scan(cfg)
    assert all(r.density == pytest.approx(0.6, abs=1e-8) for r in recs)
    amp = [np.abs(io.read_csv(tmp_path / "points" / r.point_hash / "rates.csv")["gamma"]).max()
           for r in recs]
    assert amp[0] > amp[1]
    assert recs[0].tau_goldstone > recs[1].tau_goldstone


def test_oracle_suite_writes_tables(tmp_path):
    summaries = run_oracle_suite(tmp_path)
    assert len(summaries) == 6
    free2 = next(s for s in summaries if s["kind"] == "free-continuum" and s["d"] == 2)
    assert free2["Gamma_exponent"] == pytest.approx(1.0, abs=0.01)
    assert (tmp_path / "free-lattice-d1.csv").exists()


# -- plots and CLI -------------------------------------------------------------------------

def test_plots_are_byte_stable_and_mark_goldstone_time(tmp_path):
    run_dir = tmp_path / "run"
    run_scan(ScanConfig("tip-path", (0.12, 0.3), output=str(run_dir), **SMALL))
    first = emit_plots(run_dir, tmp_path / "f1")
    second = emit_plots(run_dir, tmp_path / "f2")
    assert [p.name for p in first] == [p.name for p in second]
    assert {p.name for p in first} >= {"lambda.svg", "R.svg", "gamma_0.3.svg"}
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
    svg = (tmp_path / "f1" / "gamma_0.3.svg").read_text()
    assert "tau_G" in svg and "<dc:date>" not in svg
    assert "tau_G" not in (tmp_path / "f1" / "gamma_0.12.svg").read_text()


def test_plot_reports_missing_series(tmp_path):
    run_dir = tmp_path / "run"
    recs, _ = run_scan(ScanConfig("tip-path", (0.3,), output=str(run_dir), **SMALL))
    (run_dir / "points" / recs[0].point_hash / "rates.csv").unlink()
    with pytest.raises(MissingSeries):
        emit_plots(run_dir)
    assert main(["plot", str(run_dir)]) == 3


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "p")
    assert main(["point", "--hopping", "0.3", "--mu", "0.5", "--Ls", "8", "--n-max", "8",
                 "--t-max", "5", "--output", out]) == 0
    assert "R =" in capsys.readouterr().out
    assert main(["point", "--hopping", "2.0", "--mu", "0.5", "--Ls", "8", "--n-max", "4",
                 "--t-max", "5", "--output", str(tmp_path / "q")]) == 1
    assert main(["plot", str(tmp_path / "q")]) == 3
    assert list((tmp_path / "q").glob("**/*.svg")) == []
    cfg = _write(tmp_path, "scenario = edge-path\nhopping.values = 0.1\nbath.bogus = 1\n")
    assert main(["scan", str(cfg)]) == 2
    assert main(["scan", str(tmp_path / "absent.cfg")]) == 2
    assert main(["oracle", "--kind", "free-lattice", "--d", "2.5"]) == 2


def test_cli_scan_and_oracle(tmp_path, capsys):
    cfg = _write(tmp_path, f"""
        scenario = tip-path
        hopping.values = 0.12, 0.3
        bath.Ls = 8
        bath.n_max = 8
        time.t_max = 5
        output.dir = {tmp_path / 'scan'}
    """)
    assert main(["scan", str(cfg), "--set", "impurity.g=0.002"]) == 0
    _, recs = load_records(tmp_path / "scan")
    assert len(recs) == 2 and isinstance(recs[0], ScanRecord)
    assert main(["plot", str(tmp_path / "scan")]) == 0
    assert main(["oracle", "--kind", "free-lattice", "--t-max", "5", "--output",
                 str(tmp_path / "o")]) == 0
    data = io.read_csv(tmp_path / "o" / "free-lattice-d1.csv")
    assert data["t"][-1] == pytest.approx(5.0)
