import json
from pathlib import Path

from core.config import app_settings
from core.exceptions import InputValidationError
from core.logging_config import setup_logger
from endpoints import bounds, limits, lower_tail
from helpers.report_io import build_report, write_output
from helpers.streams import check_seed, fresh_seed
from models.run_config import PARAMS_MODELS, RunConfig, Subcommand

logger = setup_logger()

RUN_FLAGS = ("config", "seed", "workers", "chunk_size", "out", "format", "no_timestamp")
CONFIG_KEYS = set(RunConfig.model_fields)

HANDLERS = {**bounds.HANDLERS, **lower_tail.HANDLERS, **limits.HANDLERS}


def load_config_file(path: str | Path | None) -> dict:
    """
    Read a JSON run config. A previous report is accepted as well, in which
    case its embedded config is replayed.

    :param path: Config file, or None for no file
    :type path: str | Path | None
    :return: Raw config mapping
    :rtype: dict
    """
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise InputValidationError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return {}
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputValidationError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise InputValidationError(f"config file {path} must hold a JSON object")
    if "config" in raw and "results" in raw:
        logger.info(f"Replaying the config embedded in report {path}")
        raw = raw["config"]
    return raw


def parse_config(path: str | Path | None, flags: dict) -> RunConfig:
    """
    Merge the config file with command-line flags into a validated RunConfig.
    Flags that were passed win over file values; the seed falls back to a
    fresh one, which is then recorded in the report.

    :param path: Config file or None
    :type path: str | Path | None
    :param flags: Parsed flags; None means "not passed"
    :type flags: dict
    :return: Resolved run configuration
    :rtype: RunConfig
    """
    raw = load_config_file(path)
    unknown = sorted(set(raw) - CONFIG_KEYS)
    if unknown:
        raise InputValidationError(f"unknown config keys: {', '.join(unknown)}")

    subcommand = flags.get("subcommand") or raw.get("subcommand")
    if subcommand is None:
        raise InputValidationError("no subcommand given")
    if raw.get("subcommand") not in (None, subcommand):
        raise InputValidationError(
            f"config file is for '{raw['subcommand']}', not '{subcommand}'"
        )
    try:
        subcommand = Subcommand(subcommand)
    except ValueError as e:
        raise InputValidationError(f"unknown subcommand '{subcommand}'") from e

    file_params = raw.get("params") or {}
    if not isinstance(file_params, dict):
        raise InputValidationError("config 'params' must be an object")
    overrides = {
        key: value
        for key, value in flags.items()
        if key not in RUN_FLAGS and key != "subcommand" and value is not None
    }
    params = PARAMS_MODELS[subcommand].model_validate({**file_params, **overrides})

    seed = flags.get("seed")
    if seed is None:
        seed = raw.get("seed")
    if seed is None:
        seed = fresh_seed()
    check_seed(seed)

    workers = flags.get("workers") or raw.get("workers") or app_settings.DEFAULT_WORKERS

    output = dict(raw.get("output") or {})
    if flags.get("out") is not None:
        output["out"] = flags["out"]
    if flags.get("format") is not None:
        output["format"] = flags["format"]

    values = {
        "subcommand": subcommand,
        "params": params,
        "seed": seed,
        "workers": workers,
        "output": output,
        "timestamp": raw.get("timestamp", True),
    }
    chunk_size = flags.get("chunk_size") or raw.get("chunk_size")
    if chunk_size is not None:
        values["chunk_size"] = chunk_size
    if flags.get("no_timestamp"):
        values["timestamp"] = False
    return RunConfig(**values)


def run(config: RunConfig) -> dict:
    """
    Execute one subcommand and write its report.

    :param config: Resolved run configuration
    :type config: RunConfig
    :return: The report document
    :rtype: dict
    """
    logger.info(
        f"Running {config.subcommand.value} seed={config.seed} workers={config.workers}"
    )
    results, rows = HANDLERS[config.subcommand](config)
    report = build_report(config, results)
    write_output(config, report, rows)
    return report
