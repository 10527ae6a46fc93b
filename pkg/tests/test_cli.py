"""Command-line driver: exit codes, outputs, and reproducibility."""

import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from kgcharge.cli import main
from oracles import catalan

SMALL = {
    "grid": {"L": 20.0, "Nx": 32, "m": 1.0, "q": 1},
    "time": {"T": 0.4, "s": 0.4, "nt": 32},
    "coupling": 0.2,
    "initial": {"type": "gaussian", "amplitude": 0.5, "width": 2.0, "center": 0.0},
    "test_function": {
        "type": "gaussian",
        "amplitude": 1.0,
        "width": 3.0,
        "center": 0.5,
        "slot": "both",
    },
    "max_order": 3,
    "seed": 0,
}


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, name="config.json", **overrides):
    cfg = json.loads(json.dumps(SMALL))
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    cfg.setdefault("out", str(tmp_path / "run"))
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run_solved(runner, tmp_path, **overrides):
    cfg = write_config(tmp_path, **overrides)
    result = runner.invoke(main, ["solve", "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    return cfg


def test_help_lists_the_defaults(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    assert '"max_order": 4' in result.output
    assert '"Nx": 128' in result.output


def test_solve_writes_a_complete_trajectory(runner, tmp_path):
    run_solved(runner, tmp_path)
    tdir = tmp_path / "run" / "trajectory"
    nodes = sorted(tdir.glob("node_*.csv"))
    assert len(nodes) == SMALL["time"]["nt"] + 1
    manifest = json.loads((tdir / "manifest.json").read_text())
    assert manifest["coupling"] == 0.2
    assert "energy_drift" in manifest


def test_solve_records_tiny_drift_for_the_free_field(runner, tmp_path):
    run_solved(runner, tmp_path, coupling=0.0)
    manifest = json.loads((tmp_path / "run" / "trajectory" / "manifest.json").read_text())
    assert abs(manifest["energy_drift"]) <= 1e-10


def test_invalid_regularity_index_exits_2(runner, tmp_path):
    cfg = write_config(tmp_path, grid={"q": 0})
    result = runner.invoke(main, ["solve", "--config", str(cfg)])
    assert result.exit_code == 2
    assert "q > n/2" in result.output


def test_missing_config_exits_2(runner, tmp_path):
    result = runner.invoke(main, ["solve", "--config", str(tmp_path / "nope.json")])
    assert result.exit_code == 2


def test_malformed_config_exits_2(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    result = runner.invoke(main, ["solve", "--config", str(path)])
    assert result.exit_code == 2


def test_unknown_test_function_type_exits_2(runner, tmp_path):
    cfg = write_config(tmp_path, test_function={"type": "comb"})
    result = runner.invoke(main, ["solve", "--config", str(cfg)])
    assert result.exit_code == 2
    assert "test_function.type" in result.output


def test_transport_without_a_trajectory_exits_2(runner, tmp_path):
    cfg = write_config(tmp_path)
    result = runner.invoke(main, ["transport", "--config", str(cfg)])
    assert result.exit_code == 2
    assert "run solve first" in result.output


def test_transport_reports_conserved_charge_at_zero_coupling(runner, tmp_path):
    cfg = run_solved(runner, tmp_path, coupling=0.0)
    result = runner.invoke(main, ["transport", "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    with open(tmp_path / "run" / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == SMALL["max_order"] + 1
    assert all(abs(float(row["residual"])) <= 1e-10 for row in rows)


def test_transport_residuals_shrink_with_the_order(runner, tmp_path):
    cfg = run_solved(runner, tmp_path)
    result = runner.invoke(main, ["transport", "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    with open(tmp_path / "run" / "report.csv", newline="") as fh:
        residuals = [abs(float(row["residual"])) for row in csv.DictReader(fh)]
    assert residuals == sorted(residuals, reverse=True)


def test_transport_respects_the_convergence_flag(runner, tmp_path):
    cfg = run_solved(runner, tmp_path, coupling=0.6)
    blocked = runner.invoke(main, ["transport", "--config", str(cfg)])
    assert blocked.exit_code == 4
    assert "--force" in blocked.output
    forced = runner.invoke(main, ["transport", "--config", str(cfg), "--force"])
    assert forced.exit_code == 0, forced.output
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["condition_ok"] is False
    assert report["meta"]["forced"] is True


def test_transport_runs_are_reproducible(runner, tmp_path):
    cfg = run_solved(runner, tmp_path)
    assert runner.invoke(main, ["transport", "--config", str(cfg)]).exit_code == 0
    first = (tmp_path / "run" / "report.csv").read_bytes()
    assert runner.invoke(main, ["transport", "--config", str(cfg)]).exit_code == 0
    assert (tmp_path / "run" / "report.csv").read_bytes() == first


def test_sweep_needs_three_couplings(runner, tmp_path):
    cfg = write_config(tmp_path, coupling=[0.1, 0.2])
    result = runner.invoke(main, ["sweep", "--config", str(cfg)])
    assert result.exit_code == 5


def test_sweep_fits_slopes_one_past_the_order(runner, tmp_path):
    cfg = write_config(tmp_path, coupling=[0.1, 0.2, 0.4], max_order=2)
    result = runner.invoke(main, ["sweep", "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    with open(tmp_path / "run" / "sweep_slopes.csv", newline="") as fh:
        slopes = {int(row["order"]): float(row["slope"]) for row in csv.DictReader(fh)}
    for order, slope in slopes.items():
        assert slope == pytest.approx(order + 1, abs=0.2)
    assert (tmp_path / "run" / "sweep_residuals.csv").exists()


def test_lemma_check_passes_and_counts_trees(runner, tmp_path):
    result = runner.invoke(main, ["lemma-check", "--max-leaves", "4"])
    assert result.exit_code == 0, result.output
    for beta in (2, 3, 4):
        assert f"beta={beta} trees={catalan(beta - 1)}" in result.output
    assert "FAIL" not in result.output


def test_lemma_check_vacuous_below_two_leaves(runner):
    result = runner.invoke(main, ["lemma-check", "--max-leaves", "1"])
    assert result.exit_code == 0
    assert "vacuous" in result.output


def test_lemma_check_rejects_out_of_range(runner):
    assert runner.invoke(main, ["lemma-check", "--max-leaves", "9"]).exit_code == 2
    assert runner.invoke(main, ["lemma-check", "--max-leaves", "0"]).exit_code == 2


def test_readout_requires_a_dirac_spec(runner, tmp_path):
    cfg = run_solved(runner, tmp_path)
    result = runner.invoke(main, ["readout", "--config", str(cfg)])
    assert result.exit_code == 2
    assert "dirac" in result.output


def test_readout_rejects_points_outside_the_box(runner, tmp_path):
    cfg = write_config(
        tmp_path, test_function={"type": "dirac", "x0": 25.0, "width": 0.8}
    )
    result = runner.invoke(main, ["solve", "--config", str(cfg)])
    assert result.exit_code == 2
    assert "x0" in result.output


def test_readout_writes_estimates(runner, tmp_path):
    tf = {"type": "dirac", "x0": 3.0, "width": 0.8, "which": "velocity"}
    cfg = run_solved(runner, tmp_path, test_function=tf, coupling=0.0)
    result = runner.invoke(main, ["readout", "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    with open(tmp_path / "run" / "readout.csv", newline="") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["x0"]) == 3.0
    assert float(row["phi_abs_err"]) <= 2e-2
    assert float(row["dtphi_abs_err"]) <= 1e-8


def test_enumerate_streams_dyck_rows(runner):
    result = runner.invoke(main, ["enumerate", "--max-order", "4"])
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert lines[0] == "order,dyck"
    counts = {}
    for line in lines[1:]:
        order, dyck = line.split(",")
        counts[int(order)] = counts.get(int(order), 0) + 1
        assert set(dyck) <= {"L", "N"}
    assert counts == {n: catalan(n) for n in range(5)}


def test_enumerate_writes_a_file_and_validates_the_cap(runner, tmp_path):
    out = tmp_path / "trees.csv"
    result = runner.invoke(main, ["enumerate", "--max-order", "2", "--out", str(out)])
    assert result.exit_code == 0
    assert out.read_text().startswith("order,dyck\n")
    assert runner.invoke(main, ["enumerate", "--max-order", "11"]).exit_code == 2
