# tests/unit/controllers/test_run_controller.py
import json

import pytest
from pydantic import ValidationError

from controllers.chunk_runner import ChunkRunner
from controllers.run_controller import load_config_file, parse_config
from core.config import app_settings
from core.exceptions import InputValidationError
from models.run_config import ConstantsParams, Subcommand

CONSTANTS_FLAGS = {
    "subcommand": "constants",
    "n": 1,
    "r": 1,
    "alpha": 1.0,
    "t": 100.0,
    "a_const": 1.0,
}


def write_json(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_empty_config_file_with_flags(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("  \n", encoding="utf-8")
    config = parse_config(empty, {**CONSTANTS_FLAGS, "seed": 5})
    assert config.subcommand == Subcommand.CONSTANTS
    assert isinstance(config.params, ConstantsParams)
    assert config.seed == 5
    assert config.timestamp


def test_unset_flags_do_not_override_the_file(tmp_path):
    path = write_json(
        tmp_path / "run.json",
        {
            "subcommand": "constants",
            "params": {"n": 3, "r": 2, "alpha": 2.0, "t": 50.0, "a_const": 0.5},
            "seed": 7,
            "workers": 2,
        },
    )
    flags = {"subcommand": "constants", "n": None, "seed": 42, "workers": None}
    config = parse_config(path, flags)
    assert config.seed == 42
    assert config.workers == 2
    assert config.params.n == 3
    assert config.params.a_const == 0.5


def test_unknown_keys_are_named(tmp_path):
    path = write_json(tmp_path / "run.json", {"subcommand": "constants", "sede": 1})
    with pytest.raises(InputValidationError, match="sede"):
        parse_config(path, {})
    with pytest.raises(ValidationError, match="alpah"):
        parse_config(None, {**CONSTANTS_FLAGS, "alpah": 1.0})


def test_subcommand_must_be_given_and_consistent(tmp_path):
    with pytest.raises(InputValidationError, match="no subcommand"):
        parse_config(None, {})
    path = write_json(tmp_path / "run.json", {"subcommand": "gumbel"})
    with pytest.raises(InputValidationError, match="gumbel"):
        parse_config(path, CONSTANTS_FLAGS)


def test_a_report_replays_its_config(tmp_path):
    report = {
        "tool": "ordstat-compare",
        "config": {
            "subcommand": "constants",
            "params": {"n": 1, "r": 1, "alpha": 1.0, "t": 100.0, "a_const": 2.0},
            "seed": 123,
            "timestamp": False,
        },
        "results": {},
    }
    config = parse_config(write_json(tmp_path / "report.json", report), {})
    assert config.seed == 123
    assert config.params.a_const == 2.0
    assert not config.timestamp


def test_flags_update_the_output(tmp_path):
    config = parse_config(
        None,
        {**CONSTANTS_FLAGS, "seed": 1, "out": str(tmp_path / "x.csv"), "format": "csv"},
    )
    assert config.output.format.value == "csv"
    assert config.output.out.name == "x.csv"
    no_stamp = parse_config(None, {**CONSTANTS_FLAGS, "seed": 1, "no_timestamp": True})
    assert not no_stamp.timestamp


def test_missing_seed_is_drawn_fresh():
    config = parse_config(None, CONSTANTS_FLAGS)
    assert 0 <= config.seed < 2**64


@pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
def test_load_config_file_rejects_bad_files(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(InputValidationError):
        load_config_file(path)


def test_load_config_file_needs_an_existing_file(tmp_path):
    assert load_config_file(None) == {}
    with pytest.raises(InputValidationError):
        load_config_file(tmp_path / "missing.json")


@pytest.mark.parametrize("workers", [1, 3])
def test_chunk_runner_keeps_chunk_order(workers):
    results = ChunkRunner(workers).map_chunks(lambda i, size: (i, size), [4, 4, 2])
    assert results == [(0, 4), (1, 4), (2, 2)]


def test_chunk_runner_needs_a_worker():
    with pytest.raises(InputValidationError):
        ChunkRunner(0)


def test_default_workers_come_from_settings(monkeypatch):
    monkeypatch.setattr(app_settings, "DEFAULT_WORKERS", 3)
    assert parse_config(None, {**CONSTANTS_FLAGS, "seed": 1}).workers == 3
    assert ChunkRunner().workers == 3
