# tests/unit/helpers/test_report_io.py
import csv
import json
from datetime import datetime, timezone

import helpers.report_io as report_io
from core.config import APP_VERSION
from helpers.report_io import build_report, write_csv, write_output
from models.run_config import ConstantsParams, RunConfig, Subcommand


class FrozenDatetime(datetime):
    @classmethod
    def now(cls, tz=None):
        return cls(2025, 1, 2, 3, 4, 5, tzinfo=tz)


def make_config(**fields) -> RunConfig:
    return RunConfig(
        subcommand=Subcommand.CONSTANTS,
        params=ConstantsParams(n=1, r=1, alpha=1.0, t=100.0, a_const=1.0),
        seed=9,
        **fields,
    )


def test_report_embeds_config_and_timestamp(monkeypatch):
    monkeypatch.setattr(report_io, "datetime", FrozenDatetime)
    report = build_report(make_config(), {"value": 1})
    assert report["version"] == APP_VERSION
    frozen = datetime(2025, 1, 2, 3, 4, 5, tzinfo=timezone.utc)
    assert report["timestamp"] == frozen.isoformat()
    assert report["config"]["seed"] == 9
    assert report["results"] == {"value": 1}


def test_report_without_timestamp():
    report = build_report(make_config(timestamp=False), {})
    assert "timestamp" not in report
    assert list(report) == ["tool", "version", "config", "results"]


def test_csv_header_is_the_union_of_row_keys(tmp_path):
    out = tmp_path / "nested" / "rows.csv"
    write_csv([{"a": 1, "b": 2}, {"b": 3, "c": 4}], out)
    with open(out, newline="") as handle:
        reader = csv.DictReader(handle)
        rows = list(reader)
    assert reader.fieldnames == ["a", "b", "c"]
    assert rows[1] == {"a": "", "b": "3", "c": "4"}


def test_write_output_defaults_to_json_on_stdout(capsys):
    config = make_config(timestamp=False)
    write_output(config, build_report(config, {"x": 0.5}), [])
    assert json.loads(capsys.readouterr().out)["results"] == {"x": 0.5}
