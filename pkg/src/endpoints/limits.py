import numpy as np

from core.exceptions import InputValidationError
from endpoints.shared import add_flag, add_method_argument
from helpers.kernels import parse_model_spec
from models.run_config import (
    ConstantsParams,
    GumbelParams,
    GumbelVariant,
    RunConfig,
    Subcommand,
)
from services.limit_theorems import (
    GUMBEL_GRID_M,
    GUMBEL_REFINEMENT,
    calibrate_a_const,
    gumbel_experiment,
    mixed_gumbel_cdf,
    mixed_gumbel_experiment,
    norming_constants,
    normal_limit_experiment,
)


def add_parser(subparsers, parents: list) -> None:
    gumbel = subparsers.add_parser(
        "gumbel", parents=parents, help="limit theorems for the stationary supremum"
    )
    gumbel.add_argument(
        "--variant", choices=[v.value for v in GumbelVariant], help="a, b or c"
    )
    gumbel.add_argument("--gamma", type=float, help="dependence limit for variant c")
    gumbel.add_argument("--rho-t", type=float, help="rho(T) for variant b")
    _add_order_arguments(gumbel)
    gumbel.add_argument("--reps", type=int, help="replications")
    gumbel.add_argument("--a-const", type=float, help="Pickands-type constant")
    gumbel.add_argument("--model", help="stationary model SPEC, default power_exp")
    gumbel.add_argument(
        "--grid-m", type=int, help="grid points (per unit segment for b, c)"
    )
    gumbel.add_argument("--refinement", type=int, help="nested refinement levels")
    add_method_argument(gumbel)
    gumbel.set_defaults(subcommand=Subcommand.GUMBEL.value)

    constants = subparsers.add_parser(
        "constants", parents=parents, help="norming constants a and b"
    )
    _add_order_arguments(constants)
    constants.add_argument("--alpha", type=float, help="local exponent in (0, 2]")
    constants.add_argument("--a-const", type=float, help="Pickands-type constant")
    add_flag(constants, "--calibrate", "estimate the constant by simulation")
    constants.add_argument("--model", help="stationary model SPEC for calibration")
    constants.add_argument("--reps", type=int, help="calibration replications")
    constants.add_argument("--u", type=float, help="calibration level")
    constants.add_argument("--grid-m", type=int, help="calibration grid points")
    constants.add_argument("--refinement", type=int, help="nested refinement levels")
    constants.set_defaults(subcommand=Subcommand.CONSTANTS.value)


def _add_order_arguments(parser) -> None:
    parser.add_argument("--n", type=int, help="number of processes")
    parser.add_argument("--r", type=int, help="rank, r=1 is the max")
    parser.add_argument("--t", type=float, help="horizon T")


def run_gumbel(config: RunConfig) -> tuple[dict, list[dict]]:
    """
    KS check of one of the three limit laws of the standardized supremum.
    """
    params: GumbelParams = config.params
    model = parse_model_spec(params.model)
    common = dict(
        method=params.method, workers=config.workers, chunk_size=config.chunk_size
    )
    if params.refinement is not None:
        common["refinement"] = params.refinement
    if params.variant == GumbelVariant.A:
        report = gumbel_experiment(
            model,
            params.n,
            params.r,
            params.t,
            params.reps,
            params.a_const,
            config.seed,
            m=params.grid_m or GUMBEL_GRID_M,
            **common,
        )
        reference = float(np.exp(-1.0))
    elif params.variant == GumbelVariant.B:
        report = normal_limit_experiment(
            params.rho_t,
            params.n,
            params.r,
            params.t,
            params.reps,
            model,
            params.a_const,
            config.seed,
            segment_m=params.grid_m,
            **common,
        )
        reference = 0.5
    else:
        report = mixed_gumbel_experiment(
            params.gamma,
            params.n,
            params.r,
            params.t,
            params.reps,
            model,
            params.a_const,
            config.seed,
            segment_m=params.grid_m,
            **common,
        )
        reference = mixed_gumbel_cdf(0.0, params.gamma, params.r)
    results = report.model_dump(mode="json")
    results["target_cdf_at_zero"] = reference
    rows = [
        {"statistic": key, "value": value} for key, value in report.quantiles.items()
    ]
    rows.append({"statistic": "ks_distance", "value": report.ks_distance})
    rows.append({"statistic": "ks_pvalue", "value": report.ks_pvalue})
    rows.append({"statistic": "grid_delta", "value": report.grid_delta})
    rows.append({"statistic": "grid_shift", "value": report.grid_shift})
    return results, rows


def run_constants(config: RunConfig) -> tuple[dict, list[dict]]:
    """
    Norming constants, optionally with a simulated Pickands-type constant.
    """
    params: ConstantsParams = config.params
    results: dict = {}
    a_const = params.a_const
    if params.calibrate:
        model = parse_model_spec(params.model)
        if abs(model.index - params.alpha) > 1e-12:
            raise InputValidationError(
                f"alpha={params.alpha} does not match the model index {model.index}"
            )
        calibration = calibrate_a_const(
            model,
            params.n,
            params.r,
            params.t,
            params.reps,
            config.seed,
            u=params.u,
            m=params.grid_m or GUMBEL_GRID_M,
            refinement=(
                GUMBEL_REFINEMENT if params.refinement is None else params.refinement
            ),
            workers=config.workers,
            chunk_size=config.chunk_size,
        )
        results["calibration"] = calibration.model_dump(mode="json")
        a_const = calibration.value
    norming = norming_constants(params.n, params.r, params.alpha, params.t, a_const)
    results["norming"] = norming.model_dump(mode="json")
    return results, [norming.model_dump(mode="json")]


HANDLERS = {Subcommand.GUMBEL: run_gumbel, Subcommand.CONSTANTS: run_constants}
