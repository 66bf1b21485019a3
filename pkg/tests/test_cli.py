from dataclasses import replace

import numpy as np
import pytest
import yaml

from oracles import reaverage_csv
from vcsel_snn.cli import main
from vcsel_snn.config import default_config, dump_config, load_config


@pytest.fixture
def config_file(tmp_path, small_config):
    path = tmp_path / "small.yaml"
    dump_config(small_config, path)
    return path


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_init_config_round_trips(tmp_path):
    out = tmp_path / "config.yaml"
    assert main(["init-config", "--out", str(out)]) == 0
    text = out.read_text()
    assert "# " in text and "search_grid" in text
    assert load_config(out) == default_config()


def test_version_and_usage_errors(capsys):
    assert main(["--version"]) == 0
    assert main([]) == 1
    assert main(["run"]) == 1
    assert "--config is required" in capsys.readouterr().err
    assert main(["frobnicate"]) == 1


def test_missing_and_invalid_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("laser: {colour: red}\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert "colour" in capsys.readouterr().err


def _calibration_config(tmp_path, amplitudes):
    cfg = replace(default_config(), search_grid={"injection_amplitude": amplitudes, "detuning": [-6e9],
                                                 "target_margin": 0.07, "reference_drop": 0.3})
    path = tmp_path / "cal.yaml"
    dump_config(cfg, path)
    return path


def test_calibrate_writes_updated_config(tmp_path):
    path = _calibration_config(tmp_path, [0.14, 0.158, 0.6])
    assert main(["calibrate", "--config", str(path)]) == 0
    out = tmp_path / "cal.calibrated.yaml"
    cfg = load_config(out)
    assert cfg.laser.injection_amplitude == pytest.approx(0.158)
    assert cfg.calibration["margin"] == pytest.approx(0.158 / cfg.calibration["lock_boundary"] - 1)
    assert cfg.calibration["excitable_points"] == 1


def test_calibrate_empty_grid_names_the_field(tmp_path, capsys):
    path = _calibration_config(tmp_path, [])
    assert main(["calibrate", "--config", str(path)]) == 1
    assert "laser.search_grid.injection_amplitude" in capsys.readouterr().err


def test_calibrate_deep_locked_grid_exits_2(tmp_path, capsys):
    path = _calibration_config(tmp_path, [0.8, 1.2])
    assert main(["calibrate", "--config", str(path)]) == 2
    assert "calibration failed" in capsys.readouterr().err


def test_run_refuses_uncalibrated_config(tmp_path, capsys):
    path = tmp_path / "raw.yaml"
    dump_config(replace(default_config(), n_nodes=8), path)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "error in bench" in capsys.readouterr().err
    assert not (tmp_path / "o" / "manifest.yaml").exists()


def test_run_outputs_and_manifest(tmp_path, config_file):
    out = tmp_path / "run"
    assert main(["run", "--config", str(config_file), "--out", str(out), "--plot"]) == 0
    counts = np.loadtxt(out / "confusion.csv", delimiter=",", skiprows=1, dtype=int)[:, 1:]
    assert counts.shape == (3, 3) and counts.sum() == 120
    manifest = yaml.safe_load(open(out / "manifest.yaml"))
    listed = {v["path"] for v in manifest["artifacts"].values()}
    assert listed == {"raster.csv", "confusion.csv", "weights.csv", "report.yaml", "raster.svg"}
    assert manifest["version"] and manifest["started"] and manifest["finished"]
    assert manifest["config"]["pipeline"]["n_nodes"] == 16


def test_unwritable_output_dir_leaves_no_manifest(tmp_path, config_file, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    out = blocker / "run"
    assert main(["run", "--config", str(config_file), "--out", str(out)]) == 1
    assert "not writable" in capsys.readouterr().err
    assert not out.exists()


def test_repeated_runs_are_byte_identical(tmp_path, config_file):
    for name in ("a", "b"):
        assert main(["run", "--config", str(config_file), "--out", str(tmp_path / name)]) == 0
    for f in ("raster.csv", "weights.csv", "confusion.csv"):
        assert read_bytes(tmp_path / "a" / f) == read_bytes(tmp_path / "b" / f)


def test_thread_count_does_not_change_outputs(tmp_path, small_config):
    path = tmp_path / "pp.yaml"
    dump_config(replace(small_config, simulation_mode="per_point"), path)
    for n in ("1", "8"):
        assert main(["run", "--config", str(path), "--out", str(tmp_path / n), "--threads", n]) == 0
    for f in ("raster.csv", "weights.csv", "confusion.csv"):
        assert read_bytes(tmp_path / "1" / f) == read_bytes(tmp_path / "8" / f)
    assert main(["run", "--config", str(path), "--threads", "0"]) == 1


def test_seed_override_changes_mask(tmp_path, config_file):
    assert main(["export-raster", "--config", str(config_file), "--out", str(tmp_path / "a")]) == 0
    assert main(["export-raster", "--config", str(config_file), "--out", str(tmp_path / "b"),
                 "--seed", "8"]) == 0
    assert read_bytes(tmp_path / "a" / "raster.csv") != read_bytes(tmp_path / "b" / "raster.csv")
    manifest = yaml.safe_load(open(tmp_path / "b" / "manifest.yaml"))
    assert manifest["config"]["experiment"]["seed"] == 8


def test_sweep_csv_and_reaverage(tmp_path, config_file):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(config_file), "--out", str(out), "--sizes", "1:3",
                 "--runs", "4", "--plot"]) == 0
    lines = (out / "error_curve.csv").read_text().splitlines()
    assert lines[0] == "run,1,2,3" and len(lines) == 6 and lines[-1].startswith("mean,")
    mean = [float(v) for v in lines[-1].split(",")[1:]]
    np.testing.assert_allclose(mean, reaverage_csv(out / "error_curve.csv"), rtol=0, atol=1e-12)
    assert (out / "error_curve.svg").exists()


def test_sweep_rejects_zero_runs(tmp_path, config_file, capsys):
    assert main(["sweep", "--config", str(config_file), "--out", str(tmp_path / "s"), "--runs", "0"]) == 1
    assert "--runs" in capsys.readouterr().err
    assert main(["sweep", "--config", str(config_file), "--out", str(tmp_path / "z"), "--sizes", "0:3"]) == 1
    assert not (tmp_path / "z").exists()


def test_simulate_trace_for_selected_points(tmp_path, config_file):
    out = tmp_path / "trace"
    assert main(["simulate-trace", "--config", str(config_file), "--out", str(out), "--points", "0,75"]) == 0
    data = np.loadtxt(out / "trace.csv", delimiter=",", skiprows=1)
    # two 4 ns segments and one 2 ns gap, sampled every 5 ps
    assert data.shape == (2000, 2)
    assert (out / "drive.csv.meta.yaml").exists()
    bad = tmp_path / "bad"
    assert main(["simulate-trace", "--config", str(config_file), "--out", str(bad), "--points", "0,150"]) == 1
    assert main(["simulate-trace", "--config", str(config_file), "--out", str(bad), "--points", "a"]) == 1
    assert not bad.exists()
