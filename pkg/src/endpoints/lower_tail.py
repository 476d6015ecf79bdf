from core.logging_config import setup_logger
from endpoints.shared import add_flag, add_method_argument
from helpers.kernels import parse_model_spec
from models.experiment_results import CurvePoint, SlepianVariant
from models.gaussian_array import Convention
from models.paths import GridSpec
from models.run_config import (
    LishaoParams,
    LowtailParams,
    PursuitParams,
    RunConfig,
    SlepianParams,
    Subcommand,
)
from services.gaussian_paths import default_method, dump_paths_csv, sample_paths
from services.lower_tail import (
    InsufficientPointsError,
    default_window,
    fit_exponent,
    lishao_ladder,
    lowtail_curve,
    pursuit_tail,
    resolve_self_similar_model,
    slepian_process_check,
)

logger = setup_logger()

DUMPED_PATHS = 16


def add_parser(subparsers, parents: list) -> None:
    lowtail = subparsers.add_parser(
        "lowtail", parents=parents, help="lower-tail curve and exponent fit"
    )
    _add_process_arguments(lowtail)
    lowtail.add_argument("--c", type=float, help="weight of the independent Z")
    lowtail.add_argument("--x-grid", help="levels, e.g. geom:1.0:0.05:0.8")
    lowtail.add_argument("--dump-paths", help="CSV file for a few sample paths")
    _add_curve_arguments(lowtail)
    lowtail.set_defaults(subcommand=Subcommand.LOWTAIL.value)

    pursuit = subparsers.add_parser(
        "pursuit", parents=parents, help="capture-time tail of the pursuit problem"
    )
    _add_process_arguments(pursuit)
    pursuit.add_argument("--s-grid", help="times, e.g. geom:1:1000:2")
    _add_curve_arguments(pursuit)
    pursuit.set_defaults(subcommand=Subcommand.PURSUIT.value)

    lishao = subparsers.add_parser(
        "lishao", parents=parents, help="Li-Shao type constant over a T ladder"
    )
    _add_process_arguments(lishao)
    lishao.add_argument("--c", type=float, help="weight of the independent Z")
    lishao.add_argument("--t-ladder", help="horizons, e.g. lin:2:10:5")
    lishao.add_argument("--steps-per-unit", type=int, help="grid steps per unit time")
    lishao.add_argument("--level", type=float, help="sup threshold, default 0")
    add_method_argument(lishao)
    lishao.set_defaults(subcommand=Subcommand.LISHAO.value)

    slepian = subparsers.add_parser(
        "slepian", parents=parents, help="process-level Slepian ordering check"
    )
    slepian.add_argument("--model-x", help="model SPEC, e.g. power_exp:alpha=1,scale=1")
    slepian.add_argument("--model-y", help="model SPEC with larger covariance")
    slepian.add_argument("--model-z", help="model SPEC of the perturbation")
    slepian.add_argument("--c", type=float, help="weight of the perturbation")
    slepian.add_argument("--level", type=float, help="exceedance level")
    slepian.add_argument("--n", type=int)
    slepian.add_argument("--r", type=int)
    slepian.add_argument("--convention", choices=[c.value for c in Convention])
    slepian.add_argument("--paths", type=int)
    slepian.add_argument("--grid-m", type=int)
    slepian.add_argument("--t0", type=float)
    slepian.add_argument("--t1", type=float)
    add_flag(slepian, "--both-variants", "also check Z_{r:n} + cX against + cY")
    add_method_argument(slepian)
    slepian.set_defaults(subcommand=Subcommand.SLEPIAN.value)


def _add_process_arguments(parser) -> None:
    parser.add_argument("--alpha", type=float, help="self-similarity index in (0, 2)")
    parser.add_argument("--n", type=int, help="number of processes")
    parser.add_argument("--r", type=int, help="rank (descending: r=1 is the max)")
    parser.add_argument("--convention", choices=[c.value for c in Convention])
    parser.add_argument("--paths", type=int, help="replications")
    parser.add_argument("--model", help="self-similar model SPEC, default fbm")


def _add_curve_arguments(parser) -> None:
    parser.add_argument("--grid-m", type=int, help="grid points on [0, 1]")
    parser.add_argument("--refinement", type=int, help="nested refinement levels")
    parser.add_argument("--window", help="fit window lo,hi")
    add_method_argument(parser)


def _model(params):
    model = parse_model_spec(params.model) if params.model else None
    return resolve_self_similar_model(params.alpha, model)


def _fit(curve: list[CurvePoint], window, drop_largest: bool) -> dict | None:
    try:
        abscissae = [point.x for point in curve]
        window = window or default_window(abscissae, drop_largest=drop_largest)
        return fit_exponent(curve, window).model_dump(mode="json")
    except InsufficientPointsError as e:
        logger.warning(f"No exponent fit: {e}")
        return None


def run_lowtail(config: RunConfig) -> tuple[dict, list[dict]]:
    """
    Lower-tail curve of sup (X_{r:n} + c Z) over [0, 1] with its exponent fit.
    """
    params: LowtailParams = config.params
    model = _model(params)
    grid = GridSpec(t0=0.0, t1=1.0, m=params.grid_m)
    curve = lowtail_curve(
        params.alpha,
        params.n,
        params.r,
        params.c,
        params.x_grid,
        params.paths,
        grid,
        config.seed,
        model=model,
        convention=params.convention,
        refinement=params.refinement,
        method=params.method,
        workers=config.workers,
        chunk_size=config.chunk_size,
    )
    fit = _fit(curve, params.window, drop_largest=True)
    results = {
        "model": model.describe(),
        "curve": [point.model_dump(mode="json") for point in curve],
        "censored": [point.x for point in curve if point.censored],
        "fit": fit,
    }
    if fit is not None:
        results["c_hat"] = params.alpha * fit["slope"] / 2.0
        results["c_hat_stderr"] = params.alpha * fit["slope_stderr"] / 2.0
    if params.dump_paths is not None:
        paths = sample_paths(
            model,
            grid,
            min(params.paths, DUMPED_PATHS),
            config.seed,
            params.method or default_method(model, grid),
            chunk_size=config.chunk_size,
        )
        dump_paths_csv(paths, params.dump_paths)
    return results, [point.table_row() for point in curve]


def run_pursuit(config: RunConfig) -> tuple[dict, list[dict]]:
    """
    Capture-time tail P{tau > s} and the decay exponent q.
    """
    params: PursuitParams = config.params
    model = _model(params)
    curve = pursuit_tail(
        params.alpha,
        params.n,
        params.r,
        params.s_grid,
        params.paths,
        GridSpec(t0=0.0, t1=1.0, m=params.grid_m),
        config.seed,
        model=model,
        convention=params.convention,
        refinement=params.refinement,
        method=params.method,
        workers=config.workers,
        chunk_size=config.chunk_size,
    )
    fit = _fit(curve, params.window, drop_largest=False)
    results = {
        "model": model.describe(),
        "curve": [point.model_dump(mode="json") for point in curve],
        "fit": fit,
    }
    if fit is not None:
        results["q_hat"] = -fit["slope"]
        results["q_hat_stderr"] = fit["slope_stderr"]
    return results, [point.table_row() for point in curve]


def run_lishao(config: RunConfig) -> tuple[dict, list[dict]]:
    """
    Finite-horizon Li-Shao type functional for every T of the ladder.
    """
    params: LishaoParams = config.params
    model = _model(params)
    ladder = lishao_ladder(
        params.alpha,
        params.n,
        params.r,
        params.c,
        params.t_ladder,
        params.paths,
        config.seed,
        steps_per_unit=params.steps_per_unit,
        level=params.level,
        model=model,
        convention=params.convention,
        method=params.method,
        workers=config.workers,
        chunk_size=config.chunk_size,
    )
    rows = [
        {
            "T": point.T,
            "successes": point.successes,
            "value": None if point.censored else point.estimate.value,
            "stderr": None if point.censored else point.estimate.stderr,
        }
        for point in ladder
    ]
    results = {
        "model": model.describe(),
        "ladder": [point.model_dump(mode="json") for point in ladder],
    }
    return results, rows


def run_slepian(config: RunConfig) -> tuple[dict, list[dict]]:
    """
    Slepian ordering check for order-statistics processes.
    """
    params: SlepianParams = config.params
    specs = (params.model_x, params.model_y, params.model_z)
    models = [parse_model_spec(spec) for spec in specs]
    variants = (SlepianVariant.ORDER_STATS,)
    if params.both_variants:
        variants += (SlepianVariant.PERTURBATION,)
    reports = slepian_process_check(
        *models,
        params.c,
        params.level,
        GridSpec(t0=params.t0, t1=params.t1, m=params.grid_m),
        params.paths,
        config.seed,
        n=params.n,
        r=params.r,
        convention=params.convention,
        variants=variants,
        method=params.method,
        workers=config.workers,
        chunk_size=config.chunk_size,
    )
    rows = [
        {
            "variant": report.variant.value,
            "p_x": report.p_x.value,
            "stderr_x": report.p_x.stderr,
            "p_y": report.p_y.value,
            "stderr_y": report.p_y.stderr,
            "difference": report.difference,
            "ordered": report.ordered,
        }
        for report in reports
    ]
    return {"reports": [report.model_dump(mode="json") for report in reports]}, rows


HANDLERS = {
    Subcommand.LOWTAIL: run_lowtail,
    Subcommand.PURSUIT: run_pursuit,
    Subcommand.LISHAO: run_lishao,
    Subcommand.SLEPIAN: run_slepian,
}
