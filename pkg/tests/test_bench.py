"""Tests for the benchmark harness and command-line interface.

Pins the success-rate arithmetic and its strict boundary, the seeded
initial-condition sampler statistics, report round-trips through both
serialization formats, paired solver comparisons, and the CLI exit-code
contract including config-file merging.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from layered_ocp import bench, experiments
from layered_ocp.bench import (
    ExperimentConfig,
    SolverRun,
    read_report,
    run_experiment,
    sample_initial_conditions,
    success_rate,
    terminal_distance,
    write_report,
)
from layered_ocp.cli import main
from layered_ocp.dynamics import step


def small_run(success, iters=5):
    return SolverRun(terminal_state=None, terminal_distance=0.0, success=success,
                     outer_iterations=iters, total_iterations=iters, converged=True)


# --- success criterion ---------------------------------------------------------

def test_success_distance_arithmetic():
    assert terminal_distance([3.1, 2.2], np.array([3.0, 2.0]), None) == pytest.approx(
        math.sqrt(0.05))
    assert terminal_distance([3.1, 2.2], np.array([3.0, 2.0]), None) < 0.5


def test_success_boundary_is_strict():
    dist = terminal_distance([3.5, 2.0], np.array([3.0, 2.0]), None)
    assert dist == 0.5
    assert not dist < 0.5


def test_success_rate_percentage():
    records = [small_run(True)] * 18 + [small_run(False)] * 2
    assert success_rate(records) == 90.0
    assert success_rate([True, False]) == 50.0
    with pytest.raises(ValueError):
        success_rate([])


def test_terminal_distance_coordinate_selection():
    terminal = np.array([3.0, 2.0, 9.9])
    assert terminal_distance(terminal, np.array([3.0, 2.0]), (0, 1)) == 0.0


# --- initial-condition sampling ---------------------------------------------------

def test_sampler_is_deterministic_under_seed():
    a = sample_initial_conditions("uniform", 7, 4, seed=5)
    b = sample_initial_conditions("uniform", 7, 4, seed=5)
    np.testing.assert_array_equal(a, b)
    c = sample_initial_conditions("normal", 7, 4, seed=5)
    d = sample_initial_conditions("normal", 7, 4, seed=5)
    np.testing.assert_array_equal(c, d)


def test_sampler_statistics():
    u = sample_initial_conditions("uniform", 1000, 4, seed=11)
    assert u.shape == (1000, 4)
    assert np.all(u >= 0.0) and np.all(u < 1.0)
    assert np.all(np.abs(u.mean(axis=0) - 0.5) < 0.05)
    g = sample_initial_conditions("normal", 1000, 4, seed=11)
    assert np.all(np.abs(g.mean(axis=0)) < 0.1)
    assert np.all(np.abs(g.var(axis=0) - 1.0) < 0.15)


def test_sampler_validation():
    with pytest.raises(ValueError):
        sample_initial_conditions("uniform", 0, 4, seed=0)
    with pytest.raises(ValueError):
        sample_initial_conditions("poisson", 1, 4, seed=0)


# --- experiment runs ----------------------------------------------------------------

def test_single_trial_aggregates_equal_the_record():
    cfg = ExperimentConfig(experiment="linear-circle", trials=1, seed=0, horizon=10)
    report = run_experiment(cfg)
    assert len(report.trials) == 1
    run = report.trials[0].admm
    agg = report.aggregates
    assert agg["admm_success_rate"] == (100.0 if run.success else 0.0)
    assert agg["admm_iterations_mean"] == run.total_iterations
    assert agg["admm_iterations_std"] == 0.0
    assert run.oracle_match is True
    assert run.reference is not None and run.states is not None


def test_trials_see_identical_initial_conditions_for_both_solvers():
    cfg = ExperimentConfig(experiment="unicycle", trials=2, seed=3, horizon=10)
    report = run_experiment(cfg)
    for t in report.trials:
        assert t.baseline is not None
        np.testing.assert_allclose(t.admm.states[0], t.initial_state, atol=1e-15)
        np.testing.assert_allclose(t.baseline.states[0], t.initial_state, atol=1e-15)


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="pendulum", trials=1)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="unicycle", trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="unicycle", trials=1, horizon=0)


# --- report serialization --------------------------------------------------------------

def test_report_round_trip_json(tmp_path):
    cfg = ExperimentConfig(experiment="unicycle", trials=2, seed=1, horizon=10)
    report = run_experiment(cfg)
    path = tmp_path / "rep.json"
    write_report(report, str(path), "json")
    loaded = read_report(str(path))
    assert loaded.schema == bench.SCHEMA
    assert loaded.aggregates == report.aggregates
    assert loaded.experiment == report.experiment
    assert [t.trial for t in loaded.trials] == [t.trial for t in report.trials]

    # dumped trajectories re-validate against the dynamics exactly
    model = experiments.make_model("unicycle")
    for t in loaded.trials:
        states = np.array(t.admm.states)
        inputs = np.array(t.admm.inputs)
        for k in range(inputs.shape[0]):
            np.testing.assert_array_equal(states[k + 1], step(model, states[k], inputs[k]))


def test_report_round_trip_csv(tmp_path):
    cfg = ExperimentConfig(experiment="unicycle", trials=2, seed=1, horizon=10)
    report = run_experiment(cfg)
    path = tmp_path / "rep.csv"
    write_report(report, str(path), "csv")
    assert (tmp_path / "rep_trajectories.csv").exists()
    assert (tmp_path / "rep_residuals.csv").exists()
    loaded = read_report(str(path))
    assert loaded.aggregates == report.aggregates
    for orig, back in zip(report.trials, loaded.trials):
        assert back.admm.success == orig.admm.success
        assert back.admm.total_iterations == orig.admm.total_iterations
        assert back.admm.terminal_distance == orig.admm.terminal_distance
        np.testing.assert_array_equal(back.initial_state, orig.initial_state)


def test_report_rejects_unknown_schema(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema": "layered-ocp-report/999", "trials": []}))
    with pytest.raises(ValueError):
        read_report(str(path))


# --- CLI ---------------------------------------------------------------------------------

def test_cli_run_writes_report_and_exits_zero(tmp_path, capsys):
    out = tmp_path / "circle.json"
    code = main(["run", "linear-circle", "--trials", "1", "--horizon", "8",
                 "--out", str(out), "--format", "json"])
    assert code == 0
    assert out.exists()
    text = capsys.readouterr().out
    assert "success rate" in text


def test_cli_unknown_experiment_is_usage_error(capsys):
    assert main(["run", "pendulum"]) == 2
    assert main(["bogus-command"]) == 2
    capsys.readouterr()


def test_cli_unwritable_output_is_io_error(tmp_path, capsys):
    out = tmp_path / "no" / "such" / "dir" / "r.json"
    code = main(["run", "linear-circle", "--trials", "1", "--horizon", "8",
                 "--out", str(out)])
    assert code == 1
    capsys.readouterr()


def test_cli_config_file_merging(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"trials": 1, "horizon": 8, "seed": 3}))
    out = tmp_path / "merged.json"
    code = main(["run", "linear-circle", "--config", str(cfg_file),
                 "--horizon", "6", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["trials"] == 1
    assert doc["config"]["seed"] == 3
    assert doc["config"]["horizon"] == 6
    capsys.readouterr()


def test_cli_rejects_unknown_config_keys(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"trails": 2}))
    assert main(["run", "linear-circle", "--config", str(cfg_file)]) == 2
    cfg_file.write_text("not json {")
    assert main(["run", "linear-circle", "--config", str(cfg_file)]) == 2
    capsys.readouterr()


def test_cli_verify_passes(capsys):
    assert main(["verify"]) == 0
    text = capsys.readouterr().out
    assert "checks passed" in text
    assert "FAIL" not in text
