from math import ceil

import numpy as np

from controllers.chunk_runner import ChunkRunner
from core.exceptions import ComputationError, InputValidationError
from core.logging_config import setup_logger
from helpers.kernels import gram_matrix
from helpers.streams import check_seed, chunk_sizes, substream
from models.experiment_results import (
    CurvePoint,
    ExponentFit,
    LadderPoint,
    SlepianProcessReport,
    SlepianVariant,
)
from models.gaussian_array import Convention, OrderStatSelector
from models.mc_estimate import McEstimate
from models.paths import CorrelationModel, GridSpec, ModelKind, SamplingMethod
from services.gaussian_paths import (
    PathSampler,
    default_method,
    order_stat_values,
    replication_chunk,
)

logger = setup_logger()

MIN_FIT_POINTS = 3
VARIANCE_MATCH_TOL = 1e-9
ORDERING_TOL = 1e-12
DEFAULT_FIT_TRIM = 0.2
SIDE_X = 1
SIDE_Y = 2


class InsufficientSuccessesError(ComputationError):
    """
    Raised when an estimate needs at least one success and the sample had none.
    """


class InsufficientPointsError(InputValidationError):
    """
    Raised when a fit window holds fewer than three usable points.
    """


class PreconditionError(InputValidationError):
    """
    Raised when the covariance ordering or variance matching a check relies on fails.
    """


def resolve_self_similar_model(
    alpha: float, model: CorrelationModel | None
) -> CorrelationModel:
    if model is None:
        return CorrelationModel(kind=ModelKind.FBM, alpha=alpha)
    if not model.self_similar:
        raise InputValidationError(
            f"lower-tail experiments need a self-similar model, got {model.kind.value}"
        )
    if abs(model.index - alpha) > 1e-12:
        raise InputValidationError(
            f"alpha={alpha} does not match the model index {model.index}"
        )
    return model


def _check_levels(levels) -> np.ndarray:
    levels = np.asarray(levels, dtype=float)
    if levels.size == 0:
        raise InputValidationError("empty level grid")
    if np.any(np.isnan(levels)) or np.any(levels <= 0.0):
        raise InputValidationError("levels must be positive")
    return levels


def _binomial(hits: int, total: int, seed: int, diagnostics: dict) -> McEstimate:
    p_hat = hits / total
    return McEstimate(
        value=p_hat,
        stderr=float(np.sqrt(p_hat * (1.0 - p_hat) / total)),
        n_samples=total,
        seed=seed,
        diagnostics=diagnostics,
    )


def _sup_curve(
    model: CorrelationModel,
    sel: OrderStatSelector,
    c: float,
    sign: float,
    levels: np.ndarray,
    abscissae: np.ndarray,
    n_paths: int,
    grid: GridSpec,
    seed: int,
    refinement: int,
    method: SamplingMethod | None,
    workers: int | None,
    chunk_size: int | None,
) -> list[CurvePoint]:
    """
    Frequencies of {max over grid of X_{r:n} + sign c Z <= level} on nested
    grids, all strided from one sample on the finest grid.
    """
    if n_paths < 1:
        raise InputValidationError(f"n_paths must be positive, got {n_paths}")
    if c < 0.0:
        raise InputValidationError(f"c must be nonnegative, got {c}")
    if refinement < 0:
        raise InputValidationError(f"refinement must be >= 0, got {refinement}")
    seed = check_seed(seed)
    finest = grid.refined(refinement)
    method = method or default_method(model, finest)
    sampler = PathSampler(model, finest, method)
    strides = [2 ** (refinement - level) for level in range(refinement + 1)]
    with_z = c > 0.0
    per_rep = sel.n + int(with_z)

    def job(index: int, size: int) -> np.ndarray:
        rng = substream(seed, index)
        block = sampler.draw(rng, size * sel.n).reshape(size, sel.n, finest.m)
        process = order_stat_values(block, sel)
        if with_z:
            process = process + sign * c * sampler.draw(rng, size)
        counts = np.empty((len(strides), len(levels)), dtype=np.int64)
        for row, stride in enumerate(strides):
            sups = np.max(process[:, ::stride], axis=-1)
            counts[row] = np.sum(sups[:, None] <= levels[None, :], axis=0)
        return counts

    sizes = chunk_sizes(n_paths, replication_chunk(per_rep * finest.m, chunk_size))
    counts = sum(ChunkRunner(workers).map_chunks(job, sizes))
    diagnostics = sampler.diagnostics()

    points = []
    for col, (x, level) in enumerate(zip(abscissae, levels)):
        per_level = [float(k) / n_paths for k in counts[:, col]]
        hits = int(counts[-1, col])
        censored = hits == 0
        if censored:
            logger.warning(f"Censored point x={x}: no replication stayed below {level}")
        delta = abs(per_level[-1] - per_level[-2]) if refinement else 0.0
        points.append(
            CurvePoint(
                x=float(x),
                level=float(level),
                estimate=_binomial(hits, n_paths, seed, diagnostics),
                censored=censored,
                level_estimates=per_level,
                grid_delta=delta,
            )
        )
    return points


def lowtail_curve(
    alpha: float,
    n: int,
    r: int,
    c: float,
    x_grid: list[float],
    n_paths: int,
    grid: GridSpec,
    seed: int,
    model: CorrelationModel | None = None,
    convention: Convention = Convention.DESCENDING,
    refinement: int = 1,
    method: SamplingMethod | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> list[CurvePoint]:
    """
    Estimate P{sup_t (X_{r:n}(t) + c Z(t)) <= x} over the grid for every x.

    Each replication draws n paths for X_{r:n} and, when c > 0, one more for Z,
    all from the self-similar model (fbm with the given alpha by default).

    :param alpha: Self-similarity index
    :type alpha: float
    :param n: Number of processes
    :type n: int
    :param r: Rank, descending by default (r = 1 is the max)
    :type r: int
    :param c: Weight of the independent Z, c >= 0
    :type c: float
    :param x_grid: Positive levels, +inf allowed
    :type x_grid: list[float]
    :param n_paths: Replications
    :type n_paths: int
    :param grid: Time grid, usually on [0, 1]
    :type grid: GridSpec
    :param seed: Run seed
    :type seed: int
    :param model: Self-similar model, defaults to fbm(alpha)
    :type model: CorrelationModel | None
    :param convention: Rank convention
    :type convention: Convention
    :param refinement: Extra nested refinement levels, each halving the spacing
    :type refinement: int
    :return: One point per level
    :rtype: list[CurvePoint]
    """
    model = resolve_self_similar_model(alpha, model)
    sel = OrderStatSelector(r=r, n=n, convention=convention)
    levels = _check_levels(x_grid)
    return _sup_curve(
        model,
        sel,
        c,
        1.0,
        levels,
        levels,
        n_paths,
        grid,
        seed,
        refinement,
        method,
        workers,
        chunk_size,
    )


def pursuit_tail(
    alpha: float,
    n: int,
    r: int,
    s_grid: list[float],
    n_paths: int,
    grid: GridSpec,
    seed: int,
    model: CorrelationModel | None = None,
    convention: Convention = Convention.DESCENDING,
    refinement: int = 1,
    method: SamplingMethod | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> list[CurvePoint]:
    """
    Capture-time tail P{tau > s} = P{sup_[0,1] (B_{r:n} - B_0) <= s^(-alpha/2)}.

    All levels are evaluated on the same replications, so the estimates are
    nonincreasing in s.

    :return: One point per s, with x = s and level = s^(-alpha/2)
    :rtype: list[CurvePoint]
    """
    model = resolve_self_similar_model(alpha, model)
    sel = OrderStatSelector(r=r, n=n, convention=convention)
    times = _check_levels(s_grid)
    levels = times ** (-alpha / 2.0)
    return _sup_curve(
        model,
        sel,
        1.0,
        -1.0,
        levels,
        times,
        n_paths,
        grid,
        seed,
        refinement,
        method,
        workers,
        chunk_size,
    )


def default_window(
    xs: list[float], trim: float = DEFAULT_FIT_TRIM, drop_largest: bool = True
) -> tuple[float, float]:
    """
    Fit window that drops the pre-asymptotic share trim of the abscissae:
    the largest ones for lower-tail levels, the smallest for capture times.
    """
    ordered = sorted(float(x) for x in xs if np.isfinite(x))
    if len(ordered) < 2:
        raise InsufficientPointsError("a fit window needs at least two abscissae")
    keep = max(MIN_FIT_POINTS, ceil((1.0 - trim) * len(ordered)))
    kept = ordered[:keep] if drop_largest else ordered[-keep:]
    return kept[0], kept[-1]


def fit_exponent(
    curve: list[CurvePoint], window: tuple[float, float] | None = None
) -> ExponentFit:
    """
    Weighted least squares of ln p_hat on ln x with weights 1 / stderr_log^2,
    stderr_log = stderr / p_hat. Censored points are skipped. When some point
    has zero stderr all points get equal weight and the slope stderr comes
    from the residuals.

    :param curve: Curve points
    :type curve: list[CurvePoint]
    :param window: Inclusive x range, all points when None
    :type window: tuple[float, float] | None
    :return: Fitted power law
    :rtype: ExponentFit
    """
    lo, hi = window if window is not None else (-np.inf, np.inf)
    usable = [
        point
        for point in curve
        if not point.censored
        and point.estimate.value > 0.0
        and np.isfinite(point.x)
        and point.x > 0.0
        and lo <= point.x <= hi
    ]
    if len(usable) < MIN_FIT_POINTS or len({p.x for p in usable}) < MIN_FIT_POINTS:
        raise InsufficientPointsError(
            f"need {MIN_FIT_POINTS} distinct uncensored points in the window, "
            f"got {len(usable)}"
        )
    log_x = np.log([p.x for p in usable])
    log_p = np.log([p.estimate.value for p in usable])
    sigma = np.array([p.estimate.stderr / p.estimate.value for p in usable])

    if np.all(sigma > 0.0):
        weights = 1.0 / sigma
        coeffs, cov = np.polyfit(log_x, log_p, 1, w=weights, cov="unscaled")
    else:
        weights = np.ones_like(log_x)
        coeffs, cov = np.polyfit(log_x, log_p, 1, cov=True)
    slope, intercept = float(coeffs[0]), float(coeffs[1])

    residuals = log_p - (slope * log_x + intercept)
    w2 = weights**2
    mean = np.sum(w2 * log_p) / np.sum(w2)
    total = float(np.sum(w2 * (log_p - mean) ** 2))
    resid = float(np.sum(w2 * residuals**2))
    r2 = 1.0 if total <= 1e-300 else min(max(1.0 - resid / total, 0.0), 1.0)

    return ExponentFit(
        slope=slope,
        intercept=intercept,
        slope_stderr=float(np.sqrt(max(cov[0, 0], 0.0))),
        x_window=(float(np.exp(log_x.min())), float(np.exp(log_x.max()))),
        n_points=len(usable),
        r2=r2,
    )


def lishao_ladder(
    alpha: float,
    n: int,
    r: int,
    c: float,
    t_ladder: list[float],
    n_paths: int,
    seed: int,
    steps_per_unit: int = 32,
    level: float = 0.0,
    model: CorrelationModel | None = None,
    convention: Convention = Convention.DESCENDING,
    method: SamplingMethod | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> list[LadderPoint]:
    """
    -(1/T) ln P{sup_[0,T] (X*_{r:n} + c Z*) <= level} for every T of the ladder,
    from one set of Lamperti dual paths on [0, max T] read by prefixes.

    :param t_ladder: Positive horizons
    :type t_ladder: list[float]
    :param steps_per_unit: Grid steps per unit of dual time
    :type steps_per_unit: int
    :param level: Sup threshold, 0 for the Li-Shao constant
    :type level: float
    :return: One point per horizon, censored where no replication succeeded
    :rtype: list[LadderPoint]
    """
    model = resolve_self_similar_model(alpha, model)
    sel = OrderStatSelector(r=r, n=n, convention=convention)
    horizons = _check_levels(t_ladder)
    if n_paths < 1:
        raise InputValidationError(f"n_paths must be positive, got {n_paths}")
    if c < 0.0:
        raise InputValidationError(f"c must be nonnegative, got {c}")
    if steps_per_unit < 1:
        raise InputValidationError(f"steps_per_unit must be >= 1, got {steps_per_unit}")
    seed = check_seed(seed)
    t_max = float(horizons.max())
    steps = int(ceil(t_max * steps_per_unit))
    grid = GridSpec(t0=0.0, t1=steps / steps_per_unit, m=steps + 1)
    prefix = np.rint(horizons * steps_per_unit).astype(int)
    method = method or default_method(model, grid, dual=True)
    sampler = PathSampler(model, grid, method, dual=True)
    with_z = c > 0.0

    def job(index: int, size: int) -> np.ndarray:
        rng = substream(seed, index)
        block = sampler.draw(rng, size * sel.n).reshape(size, sel.n, grid.m)
        process = order_stat_values(block, sel)
        if with_z:
            process = process + c * sampler.draw(rng, size)
        running = np.maximum.accumulate(process, axis=-1)
        return np.sum(running[:, prefix] <= level, axis=0)

    per_rep = (sel.n + int(with_z)) * grid.m
    sizes = chunk_sizes(n_paths, replication_chunk(per_rep, chunk_size))
    successes = sum(ChunkRunner(workers).map_chunks(job, sizes))
    diagnostics = sampler.diagnostics()

    ladder = []
    for horizon, hits in zip(horizons, successes):
        hits = int(hits)
        if hits == 0:
            logger.warning(f"No replication stayed below {level} up to T={horizon}")
            ladder.append(LadderPoint(T=float(horizon), successes=0))
            continue
        p_hat = hits / n_paths
        stderr = np.sqrt(p_hat * (1.0 - p_hat) / n_paths) / (p_hat * horizon)
        ladder.append(
            LadderPoint(
                T=float(horizon),
                successes=hits,
                estimate=McEstimate(
                    value=max(-np.log(p_hat) / horizon, 0.0),
                    stderr=float(stderr),
                    n_samples=n_paths,
                    seed=seed,
                    diagnostics={**diagnostics, "p_hat": p_hat},
                ),
            )
        )
    return ladder


def lishao_constant(
    alpha: float,
    n: int,
    r: int,
    c: float,
    T: float,
    n_paths: int,
    seed: int,
    steps_per_unit: int = 32,
    level: float = 0.0,
    model: CorrelationModel | None = None,
    convention: Convention = Convention.DESCENDING,
    method: SamplingMethod | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> McEstimate:
    """
    Finite-horizon Li-Shao type constant -(1/T) ln P_hat with delta-method stderr.

    :raises InsufficientSuccessesError: when no replication succeeded
    """
    point = lishao_ladder(
        alpha,
        n,
        r,
        c,
        [T],
        n_paths,
        seed,
        steps_per_unit=steps_per_unit,
        level=level,
        model=model,
        convention=convention,
        method=method,
        workers=workers,
        chunk_size=chunk_size,
    )[0]
    if point.censored:
        logger.error(f"Li-Shao estimate at T={T} has zero successes")
        raise InsufficientSuccessesError(
            f"no replication stayed below {level} on [0, {T}]; "
            "use a smaller T or more paths"
        )
    return point.estimate


def _check_slepian_models(
    model_x: CorrelationModel, model_y: CorrelationModel, grid: GridSpec
) -> None:
    points = grid.points
    gram_x, gram_y = gram_matrix(model_x, points), gram_matrix(model_y, points)
    mismatch = float(np.max(np.abs(np.diag(gram_x) - np.diag(gram_y))))
    if mismatch > VARIANCE_MATCH_TOL:
        raise PreconditionError(
            f"variance functions differ on the grid (max gap {mismatch:.3e})"
        )
    excess = float(np.max(gram_x - gram_y))
    if excess > ORDERING_TOL:
        raise PreconditionError(
            f"covariance of X exceeds that of Y on the grid by {excess:.3e}"
        )


def slepian_process_check(
    model_x: CorrelationModel,
    model_y: CorrelationModel,
    model_z: CorrelationModel,
    c: float,
    level: float,
    grid: GridSpec,
    n_paths: int,
    seed: int,
    n: int = 1,
    r: int = 1,
    convention: Convention = Convention.DESCENDING,
    variants: tuple[SlepianVariant, ...] = (SlepianVariant.ORDER_STATS,),
    method: SamplingMethod = SamplingMethod.CHOLESKY,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> list[SlepianProcessReport]:
    """
    Monte Carlo check of the process-level Slepian ordering: with equal
    variances and sigma_X <= sigma_Y on the grid,

        P{sup (X_{r:n} + c Z) > level} >= P{sup (Y_{r:n} + c Z) > level}

    and likewise for Z_{r:n} + c X against Z_{r:n} + c Y. The X and Y sides use
    independent streams.

    :return: One report per requested variant
    :rtype: list[SlepianProcessReport]
    :raises PreconditionError: when the variance or ordering precondition fails
    """
    _check_slepian_models(model_x, model_y, grid)
    sel = OrderStatSelector(r=r, n=n, convention=convention)
    if n_paths < 1:
        raise InputValidationError(f"n_paths must be positive, got {n_paths}")
    seed = check_seed(seed)
    samplers = {
        "x": PathSampler(model_x, grid, method),
        "y": PathSampler(model_y, grid, method),
        "z": PathSampler(model_z, grid, method),
    }
    runner = ChunkRunner(workers)
    sizes = chunk_sizes(n_paths, replication_chunk((n + 1) * grid.m, chunk_size))

    def exceedance(variant: SlepianVariant, key: str, side: int) -> McEstimate:
        array_sampler, noise_sampler = (
            (samplers[key], samplers["z"])
            if variant == SlepianVariant.ORDER_STATS
            else (samplers["z"], samplers[key])
        )

        def job(index: int, size: int) -> int:
            rng = substream(seed, side, index)
            block = array_sampler.draw(rng, size * n).reshape(size, n, grid.m)
            process = order_stat_values(block, sel)
            if c != 0.0:
                process = process + c * noise_sampler.draw(rng, size)
            return int(np.sum(np.max(process, axis=-1) > level))

        hits = sum(runner.map_chunks(job, sizes))
        return _binomial(hits, n_paths, seed, array_sampler.diagnostics())

    reports = []
    for variant in variants:
        p_x = exceedance(variant, "x", SIDE_X)
        p_y = exceedance(variant, "y", SIDE_Y)
        slack = 3.0 * float(np.hypot(p_x.stderr, p_y.stderr))
        ordered = p_x.value >= p_y.value - slack
        if not ordered:
            logger.warning(f"Slepian ordering not observed for {variant.value}")
        reports.append(
            SlepianProcessReport(variant=variant, p_x=p_x, p_y=p_y, ordered=ordered)
        )
    return reports
