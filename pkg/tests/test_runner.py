import copy
import csv
import json
import math

import numpy as np
import pytest

from atomlens import runner
from atomlens.grid import read_snapshot, write_snapshot
from atomlens.runner import ConfigError, main, parse_scenario, run_scenario, sweep

TINY = {
    "scenario": "focus",
    "trap": {"omega_x_rad_s": 2 * math.pi * 70, "omega_y_rad_s": 2 * math.pi * 10, "omega_z_rad_s": 2 * math.pi * 70,
             "atom_number": 100000, "a_s_bec_a0": 100},
    "beam": {"a_s_laser_a0": 0},
    "bragg": {"lambda_m": 780.027e-9, "alpha_rad": math.pi, "order": 1, "delta_z_m": 40e-9, "resonance_z_m": 20e-6},
    "focus": {"detuning_ghz": 200, "lambda_m": 312e-6, "sigma_z_m": 4e-6, "xi": 5.37, "center_z_m": 2e-6},
    "grid": {"points": [256, 512], "extent_m": [6e-6, 40e-6], "center_m": [0, 8e-6], "absorber_rate_s": 2e4},
    "stepper": {"dt_s": 1e-5, "steps_per_diagnostic": 20, "ramp_time_s": 1e-4, "max_steps": 2000},
    "outputs": {"prefix": "tiny"},
}


def cfg(**changes):
    c = copy.deepcopy(TINY)
    for path, v in changes.items():
        runner.set_path(c, path.replace("__", "."), v)
    return c


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny")
    rep = run_scenario(parse_scenario(TINY), out_dir=out, snapshot_every=60)
    runner.write_report(rep, out, "tiny")
    return rep, out


def test_missing_key_is_named():
    c = cfg()
    del c["bragg"]["order"]
    with pytest.raises(ConfigError, match="bragg.order"):
        parse_scenario(c)
    c = cfg()
    del c["trap"]
    with pytest.raises(ConfigError, match="trap.omega_x_rad_s"):
        parse_scenario(c)


def test_exactly_one_conflicts():
    c = cfg(bragg__rabi_rad_s=500.0)
    with pytest.raises(ConfigError, match="conflicting.*bragg.rabi_rad_s"):
        parse_scenario(c)
    c = cfg()
    del c["focus"]["xi"]
    with pytest.raises(ConfigError, match="missing.*focus.power_w"):
        parse_scenario(c)


def test_bad_values_raise_config_errors():
    with pytest.raises(ConfigError, match="scenario"):
        parse_scenario(cfg(scenario="orbit"))
    with pytest.raises(ConfigError, match="stepper.steps_per_diagnostic"):
        parse_scenario(cfg(stepper__steps_per_diagnostic=2.5))
    with pytest.raises(ConfigError, match="grid"):
        parse_scenario(cfg(grid__points=[100, 512]))
    with pytest.raises(ConfigError, match="a_s_laser"):
        parse_scenario(cfg(beam__a_s_laser_a0=1e4))


def test_kick_alternative_resolves_order_and_angle():
    c = cfg()
    del c["bragg"]["alpha_rad"], c["bragg"]["order"]
    c["bragg"]["kick_hbar_k"] = 12
    ph = parse_scenario(c).physics
    assert ph.bragg.order == 6
    assert ph.bragg.kick() == pytest.approx(12 * 2 * math.pi / 780.027e-9, rel=1e-12)


def test_outputs_written(tiny_run):
    rep, out = tiny_run
    assert rep.summary.fwhm_m > 0 and rep.summary.n_beam > 0
    assert {p.name for p in out.iterdir()} >= {"tiny_timeseries.csv", "tiny_focus.csv", "tiny_profile.csv",
                                               "tiny_report.json", "tiny_00000060.alfs"}
    report = json.loads((out / "tiny_report.json").read_text())
    assert report["resolved"]["rabi_rad_s"] == pytest.approx(524.2, rel=1e-3)
    assert report["steps"] == rep.steps


def test_csv_is_rfc4180_with_round_trip_floats(tiny_run):
    rep, out = tiny_run
    raw = (out / "tiny_focus.csv").read_bytes()
    lines = raw.split(b"\r\n")
    assert lines[0] == b"fwhm_m,peak_density_per_um2,n_beam,fit_residual"
    assert lines[-1] == b"" and b"\n" not in raw.replace(b"\r\n", b"")
    with open(out / "tiny_focus.csv", newline="") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["fwhm_m"]) == rep.summary.fwhm_m
    assert row["fwhm_m"] == repr(rep.summary.fwhm_m)


def test_runs_are_deterministic(tiny_run, tmp_path):
    rep, out = tiny_run
    rep2 = run_scenario(parse_scenario(TINY), out_dir=tmp_path)
    runner.write_report(rep2, tmp_path, "tiny")
    for name in ("tiny_timeseries.csv", "tiny_focus.csv", "tiny_profile.csv"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_resume_matches_uninterrupted_run(tiny_run, tmp_path):
    rep, out = tiny_run
    resumed = run_scenario(parse_scenario(TINY), out_dir=tmp_path, resume=out / "tiny_00000060.alfs")
    assert resumed.steps == rep.steps
    a, b = rep.system.psin, resumed.system.psin
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))
    assert resumed.summary.fwhm_m == pytest.approx(rep.summary.fwhm_m, rel=1e-12)


def test_resume_rejects_bad_snapshots(tiny_run, tmp_path):
    _, out = tiny_run
    raw = (out / "tiny_00000060.alfs").read_bytes()
    bad = tmp_path / "bad.alfs"
    bad.write_bytes(b"ALFX" + raw[4:])
    cfg_path = tmp_path / "tiny.json"
    cfg_path.write_text(json.dumps(TINY))
    assert main(["--out-dir", str(tmp_path), "resume", str(bad), str(cfg_path)]) == 1
    snap = read_snapshot(out / "tiny_00000060.alfs")
    other = parse_scenario(cfg(grid__points=[128, 512])).grid
    small = tmp_path / "small.alfs"
    write_snapshot(small, other, snap.time, other.zeros(), other.zeros())
    with pytest.raises(ValueError, match="dims"):
        run_scenario(parse_scenario(TINY), out_dir=tmp_path, resume=small)


def test_snapshot_cadence_must_match_diagnostics(tmp_path):
    with pytest.raises(ConfigError, match="snapshot-every"):
        run_scenario(parse_scenario(TINY), out_dir=tmp_path, snapshot_every=30)


def test_single_point_sweep_equals_run(tiny_run, tmp_path):
    rep, _ = tiny_run
    c = cfg(sweep={"axes": [{"path": "beam.a_s_laser_a0", "values": [0]}]})
    rows = sweep(c, tmp_path)
    assert rows[0]["error"] == ""
    assert rows[0]["fwhm_m"] == rep.summary.fwhm_m
    assert rows[0]["n_beam"] == rep.summary.n_beam
    with open(tmp_path / "tiny.csv", newline="") as fh:
        got = list(csv.DictReader(fh))
    assert list(got[0]) == ["beam.a_s_laser_a0", "fwhm_m", "peak_density_per_um2", "n_beam", "fit_residual", "error"]


def test_sweep_records_row_errors(tmp_path):
    c = cfg(sweep={"axes": [{"path": "beam.a_s_laser_a0", "values": [0, 5000]}]})
    c["stepper"]["max_steps"] = 40
    rows = sweep(c, tmp_path)
    assert len(rows) == 2
    assert "ConvergenceError" in rows[0]["error"]
    assert "a_s_laser" in rows[1]["error"] and math.isnan(rows[1]["fwhm_m"])


def test_sweep_axes_validation():
    with pytest.raises(ConfigError, match="sweep.axes"):
        runner.sweep_points(cfg(sweep={"axes": []}))
    with pytest.raises(ConfigError, match=r"values"):
        runner.sweep_points(cfg(sweep={"axes": [{"path": "beam.a_s_laser_a0", "values": []}]}))


def test_out_dir_from_environment(tmp_path, monkeypatch):
    c = cfg(stepper__max_steps=20, outputs__prefix="env")
    c["scenario"] = "free"
    del c["focus"]
    c["free"] = {"stop_z_m": -1.0}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(c))
    monkeypatch.setenv("ATOMLENS_OUT_DIR", str(tmp_path / "envout"))
    assert main(["run", str(path)]) == 1  # stop plane never reached within max_steps
    c["stepper"]["max_steps"] = 2000
    c["free"]["stop_z_m"] = 15e-6
    path.write_text(json.dumps(c))
    assert main(["run", str(path)]) == 0
    assert (tmp_path / "envout" / "env_timeseries.csv").exists()


def test_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert main(["run", str(path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_calibrate_cli(tmp_path, capsys):
    c = {k: TINY[k] for k in ("trap", "beam", "bragg")}
    c.update(scenario="calibrate-xi",
             focus={"detuning_ghz": 200, "lambda_m": 312e-6, "sigma_z_m": 25e-6, "xi": 5.37, "center_z_m": -150e-6},
             calibrate={"target_z_m": -150e-6, "beam_halfwidth_m": 1.741e-6, "n_rays": 9})
    c["bragg"] = dict(c["bragg"], resonance_z_m=150e-6)
    path = tmp_path / "cal.json"
    path.write_text(json.dumps(c))
    assert main(["calibrate-xi", str(path)]) == 0
    out = capsys.readouterr().out.split("\r\n")
    assert out[0] == "xi,focal_z_m,rms_spot_m"
    xi, zf, _ = (float(v) for v in out[1].split(","))
    assert xi == pytest.approx(5.37, rel=0.02)
    assert zf == pytest.approx(-150e-6, abs=0.5e-6)
