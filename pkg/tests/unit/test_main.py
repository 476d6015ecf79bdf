# tests/unit/test_main.py
import csv
import json

import numpy as np
import pytest

from main import EXIT_COMPUTATION, EXIT_INVALID_INPUT, EXIT_OK, main

CONSTANTS_ARGS = ["constants", "--n", "1", "--r", "1", "--alpha", "1", "--t", "100"]


@pytest.fixture
def column_files(tmp_path):
    # d=2, n=1 arrays with cross-row correlation 0.5 and 0
    cov_x = tmp_path / "x.json"
    cov_x.write_text(json.dumps({"cov": [[1.0, 0.5], [0.5, 1.0]]}), encoding="utf-8")
    cov_y = tmp_path / "y.csv"
    cov_y.write_text("a,b\n1,0\n0,1\n", encoding="utf-8")
    return str(cov_x), str(cov_y)


def read_report(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_constants_report_on_stdout(capsys):
    assert main([*CONSTANTS_ARGS, "--a-const", "1", "--seed", "3"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["tool"] == "ordstat-compare"
    assert report["config"]["seed"] == 3
    assert "timestamp" in report
    assert report["results"]["norming"]["a"] == pytest.approx(np.sqrt(2 * np.log(100)))


def test_constants_csv(tmp_path):
    out = tmp_path / "constants.csv"
    args = [*CONSTANTS_ARGS, "--a-const", "1", "--format", "csv", "--out", str(out)]
    assert main(args) == EXIT_OK
    with open(out, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 1
    # n = r = 1, alpha = 1, A = 1: D = (1/2)^(-1/2) / sqrt(2 pi)
    log_t = np.log(100.0)
    a = np.sqrt(2.0 * log_t)
    D = np.sqrt(2.0) / np.sqrt(2.0 * np.pi)
    expected = a + (0.5 * np.log(log_t) + np.log(D)) / a
    assert float(rows[0]["b"]) == pytest.approx(expected)


def test_verify_marks_the_bound_as_dominated(tmp_path, column_files):
    out = tmp_path / "verify.json"
    args = ["verify", "--cov-x", column_files[0], "--cov-y", column_files[1]]
    args += ["--r", "1", "--u=0,0", "--samples", "20000", "--seed", "8"]
    assert main([*args, "--out", str(out)]) == EXIT_OK
    results = read_report(out)["results"]
    domination = {bound["kind"]: bound["dominated"] for bound in results["bounds"]}
    assert domination["thm1_abs"] is True
    assert results["exact_delta"] == pytest.approx(1.0 / 12.0)
    assert abs(results["estimate"] - 1.0 / 12.0) <= 4.0 * results["stderr"]
    assert results["delta"]["value"] == results["estimate"]


def test_identical_arrays_give_zero_bounds(tmp_path, column_files):
    out = tmp_path / "bounds.json"
    args = ["bounds", "--cov-x", column_files[0], "--cov-y", column_files[0]]
    assert main([*args, "--r", "1", "--u", "0.5,1", "--out", str(out)]) == EXIT_OK
    results = read_report(out)["results"]
    assert results["bounds"]
    assert all(bound["value"] == pytest.approx(0.0) for bound in results["bounds"])
    assert results["slepian_ordered"] is True


def test_replay_is_identical_across_worker_counts(tmp_path, column_files):
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    args = ["verify", "--cov-x", column_files[0], "--cov-y", column_files[1]]
    args += ["--r", "1", "--u=0.2,-0.1", "--samples", "4000", "--chunk-size", "500"]
    assert main([*args, "--workers", "1", "--out", str(first), "--no-timestamp"]) == 0
    replay = ["verify", "--config", str(first), "--workers", "4", "--out", str(second)]
    assert main(replay) == EXIT_OK
    one, four = read_report(first), read_report(second)
    assert "timestamp" not in four
    assert one["config"]["seed"] == four["config"]["seed"]
    assert one["results"] == four["results"]


@pytest.mark.parametrize(
    "args",
    [
        [],
        ["bounds", "--cov-x", "missing.json", "--cov-y", "missing.json"],
        ["constants", "--n", "1", "--r", "1", "--alpha", "1", "--t", "2"],
        [*CONSTANTS_ARGS, "--a-const", "1", "--alpah", "1"],
        ["verify", "--config", "no-such-config.json"],
    ],
)
def test_invalid_input_exits_with_one(args):
    assert main(args) == EXIT_INVALID_INPUT


def test_failed_calibration_exits_with_two():
    args = [*CONSTANTS_ARGS, "--calibrate", "--reps", "20", "--u", "50"]
    assert main([*args, "--grid-m", "33", "--seed", "1"]) == EXIT_COMPUTATION


def test_scalar_covariance_file_exits_with_one(tmp_path):
    scalar = tmp_path / "scalar.json"
    scalar.write_text("3.5", encoding="utf-8")
    args = ["bounds", "--cov-x", str(scalar), "--cov-y", str(scalar), "--r", "1"]
    assert main([*args, "--u", "0"]) == EXIT_INVALID_INPUT


def test_gumbel_report_lists_every_grid_level(tmp_path):
    out = tmp_path / "gumbel.json"
    args = ["gumbel", "--variant", "a", "--t", "10", "--reps", "20", "--seed", "2"]
    args += ["--grid-m", "33", "--refinement", "2", "--out", str(out)]
    assert main(args) == EXIT_OK
    results = read_report(out)["results"]
    assert len(results["level_ks"]) == 3
    assert results["grid_shift"] >= 0.0
