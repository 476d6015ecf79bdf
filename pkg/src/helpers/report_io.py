import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from core.config import APP_NAME, APP_VERSION
from core.logging_config import setup_logger
from models.run_config import OutputFormat, RunConfig

logger = setup_logger()


def build_report(config: RunConfig, results: dict) -> dict:
    """
    Assemble the report document: tool version, the resolved config (enough
    to replay the run), an optional timestamp and the results.

    :param config: Resolved run configuration
    :type config: RunConfig
    :param results: JSON-compatible results of the subcommand
    :type results: dict
    :return: Report document
    :rtype: dict
    """
    report = {"tool": APP_NAME, "version": APP_VERSION}
    if config.timestamp:
        report["timestamp"] = datetime.now(timezone.utc).isoformat()
    report["config"] = config.model_dump(mode="json")
    report["results"] = results
    return report


def _open_target(out: Path | None):
    if out is None:
        return sys.stdout, False
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    return open(out, "w", newline="", encoding="utf-8"), True


def write_json(report: dict, out: Path | None) -> None:
    handle, owned = _open_target(out)
    try:
        json.dump(report, handle, indent=2)
        handle.write("\n")
    finally:
        if owned:
            handle.close()


def write_csv(rows: list[dict], out: Path | None) -> None:
    """
    Write table rows with the union of their keys as header, in first-seen order.
    """
    fieldnames: list[str] = []
    for row in rows:
        fieldnames.extend(key for key in row if key not in fieldnames)
    handle, owned = _open_target(out)
    try:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if owned:
            handle.close()


def write_output(config: RunConfig, report: dict, rows: list[dict]) -> None:
    out = config.output.out
    if config.output.format == OutputFormat.CSV:
        write_csv(rows, out)
    else:
        write_json(report, out)
    if out is not None:
        logger.info(f"Wrote {config.output.format.value} report to {out}")
