import sys

from pydantic import ValidationError

from controllers.run_controller import parse_config, run
from core.config import APP_NAME, APP_VERSION
from core.exceptions import InputValidationError, OrdstatError
from core.logging_config import setup_logger
from endpoints import bounds, limits, lower_tail
from endpoints.shared import CliArgumentParser, run_arguments

logger = setup_logger()

EXIT_OK = 0
EXIT_INVALID_INPUT = 1
EXIT_COMPUTATION = 2


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(
        prog=APP_NAME,
        description="Comparison bounds and simulation experiments for order "
        "statistics of Gaussian arrays and processes.",
    )
    parser.add_argument("--version", action="version", version=APP_VERSION)
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    parents = [run_arguments()]
    for endpoint in (bounds, lower_tail, limits):
        endpoint.add_parser(subparsers, parents)
    return parser


def main(argv: list[str] | None = None) -> int:
    """
    Command-line entry point.

    :param argv: Arguments without the program name, defaults to sys.argv[1:]
    :type argv: list[str] | None
    :return: Exit status, 0 on success, 1 on invalid input, 2 on a failed computation
    :rtype: int
    """
    try:
        flags = vars(build_parser().parse_args(argv))
        config = parse_config(flags.get("config"), flags)
        run(config)
    except (InputValidationError, ValidationError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID_INPUT
    except OrdstatError as e:
        logger.error(f"Computation failed: {e}")
        return EXIT_COMPUTATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
