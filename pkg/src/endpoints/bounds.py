from core.logging_config import setup_logger
from endpoints.shared import add_flag
from helpers.covariance import load_cov_file
from models.bound_report import ABSOLUTE_KINDS, BoundKind, BoundReport
from models.gaussian_array import Convention, OrderStatSelector, ThresholdVector
from models.mc_estimate import McEstimate
from models.run_config import BoundsParams, RunConfig, Subcommand, VerifyParams
from services.bounds import evaluate_bounds, slepian_conditions
from services.mc_engine import (
    StarvedRatioError,
    UnsupportedShapeError,
    estimate_delta,
    estimate_theta_log,
    exact_prob_small,
)

logger = setup_logger()

DOMINATION_K = 3.5


def add_parser(subparsers, parents: list) -> None:
    bounds = subparsers.add_parser(
        "bounds", parents=parents, help="evaluate comparison bounds"
    )
    _add_array_arguments(bounds)
    bounds.set_defaults(subcommand=Subcommand.BOUNDS.value)

    verify = subparsers.add_parser(
        "verify", parents=parents, help="check the bounds against Monte Carlo"
    )
    _add_array_arguments(verify)
    verify.add_argument("--samples", type=int, help="samples per side")
    add_flag(verify, "--crn", "use common random numbers for both sides")
    verify.set_defaults(subcommand=Subcommand.VERIFY.value)


def _add_array_arguments(parser) -> None:
    parser.add_argument("--cov-x", help="covariance file of X (JSON or CSV)")
    parser.add_argument("--cov-y", help="covariance file of Y (JSON or CSV)")
    parser.add_argument("--r", type=int, help="rank")
    parser.add_argument("--u", help="thresholds, comma separated (use --u=-1,0)")
    parser.add_argument("--convention", choices=[c.value for c in Convention])
    parser.add_argument("--tolerance", type=float, help="condition check tolerance")


def _load(params: BoundsParams):
    u = ThresholdVector(u=params.u)
    d = len(params.u)
    spec_x = load_cov_file(params.cov_x, d)
    spec_y = load_cov_file(params.cov_y, d, spec_x.n)
    sel = OrderStatSelector(r=params.r, n=spec_x.n, convention=params.convention)
    return spec_x, spec_y, sel, u


def _bound_results(
    spec_x, spec_y, sel, u, tolerance
) -> tuple[dict, list[BoundReport]]:
    reports = evaluate_bounds(spec_x, spec_y, sel.ascending_rank, u, tolerance)
    ordered, violated = slepian_conditions(spec_x, spec_y, tolerance)
    results = {
        "d": spec_x.d,
        "n": spec_x.n,
        "ascending_rank": sel.ascending_rank,
        "bounds": [report.model_dump(mode="json") for report in reports],
        "slepian_ordered": ordered,
        "slepian_violations": [condition.value for condition in violated],
    }
    return results, reports


def run_bounds(config: RunConfig) -> tuple[dict, list[dict]]:
    """
    Evaluate every applicable comparison bound for two covariance files.

    :param config: Resolved run configuration
    :type config: RunConfig
    :return: Results and CSV rows
    :rtype: tuple[dict, list[dict]]
    """
    spec_x, spec_y, sel, u = _load(config.params)
    results, reports = _bound_results(spec_x, spec_y, sel, u, config.params.tolerance)
    return results, [report.table_row() for report in reports]


def is_dominated(
    report: BoundReport, delta: McEstimate, theta: McEstimate | None
) -> bool | None:
    """
    Whether the Monte Carlo estimate respects the bound up to 3.5 standard
    errors; None when the bound does not apply or has nothing to compare with.
    """
    if not report.applicable:
        return None
    if report.kind == BoundKind.PROP2_LOG_RATIO:
        if theta is None:
            return None
        return theta.value <= report.value + DOMINATION_K * theta.stderr
    slack = report.value + DOMINATION_K * delta.stderr
    if report.kind in ABSOLUTE_KINDS:
        return abs(delta.value) <= slack
    return delta.value <= slack


def run_verify(config: RunConfig) -> tuple[dict, list[dict]]:
    """
    Estimate Delta and ln Theta by Monte Carlo and check each bound against them.

    :param config: Resolved run configuration
    :type config: RunConfig
    :return: Results and CSV rows
    :rtype: tuple[dict, list[dict]]
    """
    params: VerifyParams = config.params
    spec_x, spec_y, sel, u = _load(params)
    results, reports = _bound_results(spec_x, spec_y, sel, u, params.tolerance)
    common = dict(
        n_samples=params.samples,
        seed=config.seed,
        workers=config.workers,
        chunk_size=config.chunk_size,
        antithetic=params.antithetic,
        crn=params.crn,
    )
    delta = estimate_delta(spec_x, spec_y, sel, u, **common)
    try:
        theta = estimate_theta_log(spec_x, spec_y, sel, u, **common)
    except StarvedRatioError as e:
        logger.warning(f"Ratio estimate skipped: {e}")
        theta = None
        results["theta_note"] = str(e)

    try:
        exact = exact_prob_small(spec_x, sel, u) - exact_prob_small(spec_y, sel, u)
    except UnsupportedShapeError:
        exact = None

    rows = []
    for report, entry in zip(reports, results["bounds"]):
        entry["dominated"] = is_dominated(report, delta, theta)
        rows.append({**report.table_row(), "dominated": entry["dominated"]})
    results.update(
        {
            "estimate": delta.value,
            "stderr": delta.stderr,
            "delta": delta.model_dump(mode="json"),
            "log_ratio": None if theta is None else theta.model_dump(mode="json"),
            "exact_delta": exact,
        }
    )
    if exact is not None and not delta.within(exact, DOMINATION_K):
        logger.warning(f"Estimate {delta.value:.6g} is off the exact value {exact:.6g}")
    return results, rows


HANDLERS = {Subcommand.BOUNDS: run_bounds, Subcommand.VERIFY: run_verify}
