import argparse

from core.exceptions import InputValidationError
from models.paths import SamplingMethod
from models.run_config import OutputFormat


class CliArgumentParser(argparse.ArgumentParser):
    """
    ArgumentParser that reports usage errors as InputValidationError, so they
    share the exit status of every other validation failure.
    """

    def error(self, message: str):
        raise InputValidationError(f"{self.prog}: {message}")


def run_arguments() -> argparse.ArgumentParser:
    """
    Flags shared by every subcommand. Defaults are None so that only flags the
    user actually passed override the config file.
    """
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("run")
    group.add_argument("--config", help="JSON run config or a previous report")
    group.add_argument("--seed", type=int, help="64-bit unsigned seed")
    group.add_argument("--workers", type=int, help="worker threads")
    group.add_argument("--chunk-size", type=int, help="samples per random substream")
    group.add_argument("--out", help="report path, stdout when omitted")
    group.add_argument("--format", choices=[f.value for f in OutputFormat])
    group.add_argument(
        "--no-timestamp",
        dest="no_timestamp",
        action="store_true",
        default=None,
        help="leave the timestamp out of the report",
    )
    return parent


def add_method_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=[m.value for m in SamplingMethod])


def add_flag(parser: argparse.ArgumentParser, name: str, help_text: str) -> None:
    parser.add_argument(name, action="store_true", default=None, help=help_text)
