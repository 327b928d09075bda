"""CLI surface: subcommands, files, exit codes, config precedence."""

from __future__ import annotations

import csv
import json
import subprocess
import sys
from datetime import datetime, timedelta

import numpy as np
import pytest
from click.testing import CliRunner

from loadsizer.cli import main, read_config
from loadsizer.errors import UsageError


@pytest.fixture()
def runner():
    return CliRunner()


def write_csv(path, values, start=datetime(2021, 6, 1), interval=900):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "power_w"])
        for k, v in enumerate(values):
            writer.writerow([(start + k * timedelta(seconds=interval)).isoformat(), f"{v:.4f}"])
    return path


@pytest.fixture()
def small_csv(tmp_path):
    rng = np.random.default_rng(5)
    days = []
    for _ in range(3):
        arch = np.sin(np.linspace(0, np.pi, 40)) * rng.uniform(0.6, 1.0)
        days.append(np.concatenate([np.zeros(28), arch * 1000, np.zeros(28)]))
    return write_csv(tmp_path / "small.csv", np.concatenate(days))


def test_fit_writes_model(runner, clear_day_csv, tmp_path):
    result = runner.invoke(
        main, ["fit", str(clear_day_csv), "--output-dir", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    model = json.loads((tmp_path / "model.json").read_text())
    assert set(model) == {"a", "b", "c", "alpha", "beta", "gamma", "p1", "p2", "p3", "t_max", "y_max"}
    assert model["b"] == pytest.approx(0.006952, rel=0.02)


def test_size_analytic_clear_day(runner, clear_day_csv, tmp_path):
    result = runner.invoke(
        main,
        ["size", "--method", "analytic", "--n", "1", str(clear_day_csv), "--output-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "result_analytic_n1.json").read_text())
    assert payload["solar_utilization"] == pytest.approx(0.56, abs=0.01)
    header = (tmp_path / "schedule_analytic_n1.csv").read_text().splitlines()[0]
    assert header == "timestamp,S,u_1,captured,mismatch"


def test_size_ecls_constant_fixture(runner, tmp_path):
    path = write_csv(tmp_path / "const.csv", np.full(80, 500.0))
    result = runner.invoke(
        main,
        ["size", "--method", "ecls", "--n", "2", str(path), "--output-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "result_ecls_n2.json").read_text())
    assert payload["solar_utilization"] == pytest.approx(1.0, abs=1e-9)


def test_size_milp_three_point_fixture(runner, tmp_path):
    path = write_csv(tmp_path / "three.csv", np.array([300.0, 600.0, 900.0]))
    result = runner.invoke(
        main,
        [
            "size", "--method", "milp", "--n", "2", str(path),
            "--ratio", "1", "--gap", "0", "--output-dir", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "result_milp_n2.json").read_text())
    assert payload["objective"] == pytest.approx(0.0, abs=1e-9)
    assert sorted(payload["x"], reverse=True) == pytest.approx([2 / 3, 1 / 3], abs=1e-9)


def test_schedule_command(runner, tmp_path):
    path = write_csv(tmp_path / "three.csv", np.array([300.0, 600.0, 900.0]))
    result = runner.invoke(
        main,
        ["schedule", "--sizes", "0.6667,0.3333", str(path), "--output-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "schedule.csv").read_text().splitlines()
    assert len(lines) == 4


def test_sensitivity_row_count(runner, small_csv, tmp_path):
    result = runner.invoke(
        main,
        [
            "sensitivity", "--n", "2", "--steps", "42", "--block-length", "4",
            str(small_csv), "--output-dir", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "sensitivity.csv").read_text().strip().splitlines()
    assert len(lines) == 43  # header + one row per C value


def test_histogram_command_combo_columns(runner, small_csv, tmp_path):
    result = runner.invoke(
        main,
        ["histogram", "--sizes", "0.5,0.25", str(small_csv), "--output-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    rows = (tmp_path / "histogram.csv").read_text().strip().splitlines()[1:]
    combos = {int(r.split(",")[1]) for r in rows}
    assert combos == {1, 2, 3}


def test_compare_small(runner, small_csv, tmp_path):
    result = runner.invoke(
        main,
        [
            "compare", "--n-range", "2-2", str(small_csv), "--output-dir", str(tmp_path),
            "--block-length", "4", "--ratio", "1", "--node-limit", "40",
        ],
    )
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(open(tmp_path / "normalized_su.csv")))
    by_method = {r["method"]: float(r["normalized_SU"]) for r in rows}
    assert by_method["ecls"] == pytest.approx(1.0, abs=1e-12)
    assert set(by_method) == {"ecls", "icls", "milp"}


def test_compare_partial_failure_exit_3(runner, tmp_path):
    # 30 daytime points cannot feed the default 60-point ECLS design
    path = write_csv(tmp_path / "tiny.csv", np.concatenate([np.zeros(5), np.linspace(100, 900, 30)]))
    result = runner.invoke(
        main,
        [
            "compare", "--n-range", "2-2", str(path), "--output-dir", str(tmp_path),
            "--ratio", "1", "--node-limit", "30",
        ],
    )
    assert result.exit_code == 3
    assert (tmp_path / "comparison.csv").exists()
    rows = list(csv.DictReader(open(tmp_path / "comparison.csv")))
    assert {r["method"] for r in rows} == {"icls", "milp"}


def test_config_defaults_and_flag_precedence(runner, small_csv, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# knobs\nsteps=11\nblock_length=4\n")
    result = runner.invoke(
        main,
        [
            "sensitivity", "--n", "2", str(small_csv), "--config", str(cfg),
            "--output-dir", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert len((tmp_path / "sensitivity.csv").read_text().strip().splitlines()) == 12
    # explicit flag beats the config value
    result = runner.invoke(
        main,
        [
            "sensitivity", "--n", "2", "--steps", "5", str(small_csv),
            "--config", str(cfg), "--output-dir", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert len((tmp_path / "sensitivity.csv").read_text().strip().splitlines()) == 6


def test_read_config_rejects_garbage(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("steps 11\n")
    with pytest.raises(UsageError):
        read_config(cfg)


def test_exit_codes_via_subprocess(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,power_w\nnot-a-date,1\n")
    env_cmd = [sys.executable, "-m", "loadsizer.cli"]
    usage = subprocess.run(
        env_cmd + ["size", "--method", "nope", "--n", "1", str(bad)],
        capture_output=True,
        text=True,
    )
    assert usage.returncode == 2
    data = subprocess.run(
        env_cmd + ["size", "--method", "ecls", "--n", "1", str(bad)],
        capture_output=True,
        text=True,
    )
    assert data.returncode == 1
    assert "error" in data.stderr.lower()


def test_denormalize_reports_watts(runner, tmp_path):
    path = write_csv(tmp_path / "three.csv", np.array([300.0, 600.0, 900.0]))
    result = runner.invoke(
        main,
        [
            "size", "--method", "milp", "--n", "1", str(path), "--ratio", "1",
            "--denormalize", "--output-dir", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "result_milp_n1.json").read_text())
    assert payload["diagnostics"]["s_max_watts"] == pytest.approx(900.0)
    assert payload["diagnostics"]["x_watts"][0] == pytest.approx(
        payload["x"][0] * 900.0, rel=1e-12
    )
