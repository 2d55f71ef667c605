import json
import subprocess
import sys

import yaml

from cropsim.cli import main
from cropsim.datagen import read_episode_rows


def test_simulate_writes_outputs(tmp_path, capsys):
    code = main(["simulate", "--config", "wheat", "--policy", "biweekly_NW",
                 "--out", str(tmp_path), "--seed", "5"])
    assert code == 0
    out = capsys.readouterr().out
    assert "final yield" in out
    for name in ("episode.csv", "episode.jsonl", "rollout.jsonl",
                 "run_config.yaml"):
        assert (tmp_path / name).exists()
    rollout = [json.loads(line) for line in
               (tmp_path / "rollout.jsonl").read_text().splitlines()]
    assert rollout[0]["step"] == 0
    assert len(rollout[0]["observation"]) == 13
    assert {"action", "reward", "terminated", "truncated", "info"} <= set(rollout[0])


def test_simulate_set_override_changes_run(tmp_path):
    main(["simulate", "--config", "wheat", "--out", str(tmp_path / "a"),
          "--policy", "biweekly_NW"])
    main(["simulate", "--config", "wheat", "--out", str(tmp_path / "b"),
          "--policy", "biweekly_NW", "--set", "crop.TSUM1=700"])
    a = (tmp_path / "a" / "episode.csv").read_bytes()
    b = (tmp_path / "b" / "episode.csv").read_bytes()
    assert a != b
    snap = yaml.safe_load((tmp_path / "b" / "run_config.yaml").read_text())
    assert snap["crop"]["params"]["TSUM1"] == 700.0
    assert snap["applied_overrides"] == ["crop.TSUM1=700"]


def test_simulate_rollout_masks(tmp_path):
    code = main(["simulate", "--config", "wheat", "--mask", "minimal",
                 "--out", str(tmp_path)])
    assert code == 0
    rollout = [json.loads(line) for line in
               (tmp_path / "rollout.jsonl").read_text().splitlines()]
    assert len(rollout[0]["observation"]) == 7


def test_validation_error_exit_code(tmp_path, capsys):
    assert main(["simulate", "--config", "not-a-crop", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "error" in err
    bad = tmp_path / "bad.yaml"
    bad.write_text("crop_name: wheat\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_runtime_error_exit_code(tmp_path, capsys):
    blocker = tmp_path / "occupied"
    blocker.write_text("")
    code = main(["simulate", "--config", "wheat", "--out",
                 str(blocker / "sub")])
    assert code == 2


def test_gen_data_cli(tmp_path):
    code = main(["gen-data", "--config", "maize_bench", "--policy", "random",
                 "--episodes", "2", "--out", str(tmp_path), "--format", "jsonl",
                 "--seed", "3"])
    assert code == 0
    manifest = yaml.safe_load((tmp_path / "manifest.yaml").read_text())
    assert len(manifest["episodes"]) == 2
    rows = read_episode_rows(tmp_path / "episode_0000.jsonl")
    assert rows[0]["date"].startswith("2020-")


def test_bench_cli(capsys):
    assert main(["bench", "--config", "maize_bench", "--trials", "3"]) == 0
    out = capsys.readouterr().out
    assert "Step Function" in out and "Reset Function" in out


def test_calibrate_cli(tmp_path, capsys):
    dataset = tmp_path / "phen.csv"
    dataset.write_text(
        "cultivar,year,weather_file,doy_budbreak,doy_bloom,doy_veraison\n"
        "test,2003,synthetic:7:46.3,105,145,202\n"
        "test,2004,synthetic:7:46.3,107,144,201\n")
    bounds = tmp_path / "bounds.yaml"
    bounds.write_text(yaml.safe_dump({
        "TBASE": [2.0, 8.0], "CHILL_REQ": [30.0, 100.0], "DLCRIT": [11.5, 14.0],
        "TCHILL_MAX": [6.0, 12.0], "FORCE_BB": [60.0, 250.0],
        "FORCE_BL": [300.0, 800.0], "FORCE_VE": [1000.0, 1900.0]}))
    code = main(["calibrate", "--dataset", str(dataset), "--bounds", str(bounds),
                 "--iters", "5", "--out", str(tmp_path / "out")])
    assert code == 0
    doc = yaml.safe_load((tmp_path / "out" / "calibration.yaml").read_text())
    assert set(doc["rmse_days"]) == {"BUDBREAK", "BLOOM", "VERAISON"}
    trace = (tmp_path / "out" / "trace.csv").read_text().splitlines()
    assert trace[0] == "stage,evaluation,best_loss"
    assert len(trace) == 1 + 3 * 15


def test_list_command(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "grape" in out and "no_op" in out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "cropsim", "simulate", "--config", "maize_bench",
         "--out", str(tmp_path), "--policy", "no_op"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "final yield" in proc.stdout
