from math import ceil, comb

import numpy as np
from numpy.polynomial import hermite_e
from scipy import stats

from controllers.chunk_runner import ChunkRunner
from core.config import app_settings
from core.exceptions import InputValidationError
from core.logging_config import setup_logger
from helpers.special_fn import SQRT_2PI, std_normal_cdf
from helpers.streams import check_seed, chunk_sizes, substream
from models.experiment_results import (
    QUANTILE_LEVELS,
    LimitCheckReport,
    LimitTarget,
    NormingConstants,
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
from services.lower_tail import InsufficientSuccessesError

logger = setup_logger()

HERMITE_NODES = 128
GUMBEL_GRID_M = 2**14 + 1
GUMBEL_REFINEMENT = 3
MIXTURE_REFINEMENT = 2
CALIBRATION_LEVEL = 3.0
NORMAL_ADVISORY_GATE = 3.0

_hermite_nodes, _hermite_weights = hermite_e.hermegauss(HERMITE_NODES)


def _effective_horizon(model: CorrelationModel, T: float) -> float:
    # rho(t) = exp(-|t / scale|^alpha) is the unit-scale process run at t / scale
    if model.kind == ModelKind.POWER_EXP:
        return T / model.scale
    return T


def _stationary_model(model: CorrelationModel) -> CorrelationModel:
    if not model.stationary:
        raise InputValidationError(
            f"limit experiments need a stationary model, got {model.kind.value}"
        )
    if model.kind == ModelKind.CUSTOM_TABLE:
        logger.warning(
            "custom correlation: rho(t) ln t -> 0 is assumed, not checked"
        )
    return model


def norming_constants(
    n: int, r: int, alpha: float, T: float, A_const: float
) -> NormingConstants:
    """
    Norming constants of the stationary order-statistics supremum:

        a = sqrt(2 r ln T)
        b = sqrt((2 / r) ln T) + ((1/alpha - r/2) ln ln T + ln D) / sqrt(2 r ln T)

    with D = (r/2)^(r/2 - 1/alpha) C(n, r) A (2 pi)^(-r/2).

    :param n: Number of processes
    :type n: int
    :param r: Rank, r = 1 is the max
    :type r: int
    :param alpha: Local exponent in (0, 2]
    :type alpha: float
    :param T: Horizon, T > e
    :type T: float
    :param A_const: Pickands-type constant, > 0
    :type A_const: float
    :return: Norming constants
    :rtype: NormingConstants
    """
    if not T > np.e:
        raise InputValidationError(f"norming constants need T > e, got T={T}")
    if not A_const > 0.0:
        raise InputValidationError(f"A_const must be positive, got {A_const}")
    if not 1 <= r <= n:
        raise InputValidationError(f"rank r={r} outside 1..{n}")
    if not 0.0 < alpha <= 2.0:
        raise InputValidationError(f"alpha must lie in (0, 2], got {alpha}")

    log_t = np.log(T)
    D = (
        (r / 2.0) ** (r / 2.0 - 1.0 / alpha)
        * comb(n, r)
        * A_const
        / (2.0 * np.pi) ** (r / 2.0)
    )
    a = np.sqrt(2.0 * r * log_t)
    correction = (1.0 / alpha - r / 2.0) * np.log(log_t) + np.log(D)
    b = np.sqrt(2.0 / r * log_t) + correction / a
    return NormingConstants(
        a=float(a), b=float(b), T=T, n=n, r=r, alpha=alpha, A_const=A_const, D=float(D)
    )


def mixed_gumbel_cdf(x, gamma: float, r: int):
    """
    E[exp(-exp(-(x + gamma - sqrt(2 gamma r) W)))] for W ~ N(0, 1), by
    128-node Gauss-Hermite quadrature.

    :param x: Scalar or array
    :param gamma: Dependence limit, > 0
    :type gamma: float
    :param r: Rank
    :type r: int
    :return: Mixed Gumbel distribution function at x
    """
    if not gamma > 0.0:
        raise InputValidationError(f"gamma must be positive, got {gamma}")
    if r < 1:
        raise InputValidationError(f"r must be >= 1, got {r}")
    x = np.asarray(x, dtype=float)
    shift = x[..., None] + gamma - np.sqrt(2.0 * gamma * r) * _hermite_nodes
    with np.errstate(over="ignore"):
        values = np.exp(-np.exp(-shift))
    result = np.clip(values @ _hermite_weights / SQRT_2PI, 0.0, 1.0)
    return float(result) if result.ndim == 0 else result


def _summary(sample: np.ndarray) -> dict[str, float]:
    values = np.quantile(sample, QUANTILE_LEVELS)
    summary = {
        f"q{int(round(level * 100)):02d}": float(value)
        for level, value in zip(QUANTILE_LEVELS, values)
    }
    summary["mean"] = float(np.mean(sample))
    return summary


def _ks_report(
    level_sups: np.ndarray,
    standardize,
    cdf,
    target: LimitTarget,
    norming: NormingConstants,
    extrapolate: bool,
    **extra,
) -> LimitCheckReport:
    level_ks = [float(stats.kstest(standardize(s), cdf).statistic) for s in level_sups]
    shift = grid_extrapolation(level_sups) if extrapolate else 0.0
    statistic = standardize(level_sups[-1] + shift)
    result = stats.kstest(statistic, cdf)
    delta = abs(level_ks[-1] - level_ks[-2]) if len(level_ks) > 1 else 0.0
    logger.info(
        f"{target.value}: KS {result.statistic:.4f} on {len(statistic)} reps, "
        f"grid shift {shift:.4g}, level KS {[round(ks, 4) for ks in level_ks]}"
    )
    return LimitCheckReport(
        target=target,
        ks_distance=float(result.statistic),
        ks_pvalue=float(result.pvalue),
        n_replications=len(statistic),
        quantiles=_summary(statistic),
        norming=norming,
        level_ks=level_ks,
        grid_delta=delta,
        grid_shift=shift,
        **extra,
    )


def grid_extrapolation(level_sups: np.ndarray) -> float:
    """
    Aitken estimate of the grid bias left in the finest-level suprema. The
    mean gaps between the last three nested levels are taken as a geometric
    sequence and summed to infinity.

    :param level_sups: Suprema per nested grid, shape (levels, reps), coarsest
        first
    :type level_sups: np.ndarray
    :return: Nonnegative shift in supremum units, 0 with fewer than three
        levels or gaps that do not shrink
    :rtype: float
    """
    if len(level_sups) < 3:
        return 0.0
    coarse_gap = float(np.mean(level_sups[-2] - level_sups[-3]))
    fine_gap = float(np.mean(level_sups[-1] - level_sups[-2]))
    if not 0.0 < fine_gap < coarse_gap:
        logger.warning(
            f"grid gaps {coarse_gap:.3g} -> {fine_gap:.3g} do not shrink, "
            "no extrapolation"
        )
        return 0.0
    ratio = fine_gap / coarse_gap
    return fine_gap * ratio / (1.0 - ratio)


def _check_refinement(refinement: int) -> list[int]:
    if refinement < 0:
        raise InputValidationError(f"refinement must be >= 0, got {refinement}")
    return [2 ** (refinement - level) for level in range(refinement + 1)]


def _sup_sampler(
    model: CorrelationModel, grid: GridSpec, method: SamplingMethod | None
) -> PathSampler:
    return PathSampler(model, grid, method or default_method(model, grid))


def _running_sups(
    sampler: PathSampler,
    sel: OrderStatSelector,
    strides: list[int],
    n_reps: int,
    seed: int,
    workers: int | None,
    chunk_size: int | None,
) -> tuple[np.ndarray, dict[str, float]]:
    """
    Grid suprema of the order-statistics process, one row per nested grid
    (strided from the sampler's finest grid) and one column per replication.
    """
    m = sampler.grid.m

    def job(index: int, size: int) -> np.ndarray:
        rng = substream(seed, index)
        block = sampler.draw(rng, size * sel.n).reshape(size, sel.n, m)
        process = order_stat_values(block, sel)
        return np.stack([np.max(process[:, ::s], axis=-1) for s in strides])

    sizes = chunk_sizes(n_reps, replication_chunk(sel.n * m, chunk_size))
    level_sups = np.concatenate(ChunkRunner(workers).map_chunks(job, sizes), axis=1)
    return level_sups, sampler.diagnostics()


def _check_reps(n_reps: int) -> None:
    if n_reps < 2:
        raise InputValidationError(f"n_reps must be at least 2, got {n_reps}")


def calibrate_a_const(
    model: CorrelationModel,
    n: int,
    r: int,
    T: float,
    n_reps: int,
    seed: int,
    u: float = CALIBRATION_LEVEL,
    m: int = GUMBEL_GRID_M,
    refinement: int = GUMBEL_REFINEMENT,
    method: SamplingMethod | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> McEstimate:
    """
    Coarse A_{r,alpha} from the finite-horizon exceedance asymptotics

        P{sup_[0,T] X_{r:n} > u}
            ~ T A C(n, r) (2 pi)^(-r/2) u^(2/alpha - r) exp(-r u^2 / 2)

    solved for A at a moderate level u. The suprema are taken on the finest
    nested grid and shifted by the extrapolated grid bias.

    :raises InsufficientSuccessesError: when no replication exceeded u
    """
    model = _stationary_model(model)
    _check_reps(n_reps)
    strides = _check_refinement(refinement)
    seed = check_seed(seed)
    sel = OrderStatSelector(r=r, n=n, convention=Convention.DESCENDING)
    finest = GridSpec(t0=0.0, t1=T, m=m).refined(refinement)
    sampler = _sup_sampler(model, finest, method)
    level_sups, diagnostics = _running_sups(
        sampler, sel, strides, n_reps, seed, workers, chunk_size
    )
    shift = grid_extrapolation(level_sups)
    hits = int(np.sum(level_sups[-1] + shift > u))
    if hits == 0:
        logger.error(f"A calibration: no exceedance of u={u}")
        raise InsufficientSuccessesError(
            f"no replication exceeded u={u}; lower u or raise the horizon"
        )
    alpha = model.index
    p_hat = hits / n_reps
    scale = (
        _effective_horizon(model, T)
        * comb(n, r)
        * (2.0 * np.pi) ** (-r / 2.0)
        * u ** (2.0 / alpha - r)
        * np.exp(-r * u * u / 2.0)
    )
    return McEstimate(
        value=p_hat / scale,
        stderr=float(np.sqrt(p_hat * (1.0 - p_hat) / n_reps)) / scale,
        n_samples=n_reps,
        seed=seed,
        diagnostics={**diagnostics, "p_exceed": p_hat, "u": u, "grid_shift": shift},
    )


def gumbel_experiment(
    model: CorrelationModel,
    n: int,
    r: int,
    T: float,
    n_reps: int,
    A_const: float,
    seed: int,
    m: int = GUMBEL_GRID_M,
    refinement: int = GUMBEL_REFINEMENT,
    extrapolate: bool = True,
    method: SamplingMethod | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> LimitCheckReport:
    """
    KS check of a (sup_[0,T] X_{r:n} - b) against exp(-exp(-x)) for a
    stationary model with rho(t) ln t -> 0.

    :param model: Stationary correlation model
    :type model: CorrelationModel
    :param n: Number of processes
    :type n: int
    :param r: Rank, r = 1 is the max
    :type r: int
    :param T: Horizon
    :type T: float
    :param n_reps: Replications
    :type n_reps: int
    :param A_const: Pickands-type constant
    :type A_const: float
    :param seed: Run seed
    :type seed: int
    :param m: Points of the coarsest grid on [0, T]
    :type m: int
    :param refinement: Nested refinement levels above m
    :type refinement: int
    :param extrapolate: Shift the finest suprema by the extrapolated grid bias
    :type extrapolate: bool
    :return: KS report
    :rtype: LimitCheckReport
    """
    model = _stationary_model(model)
    _check_reps(n_reps)
    strides = _check_refinement(refinement)
    seed = check_seed(seed)
    horizon = _effective_horizon(model, T)
    norming = norming_constants(n, r, model.index, horizon, A_const)
    sel = OrderStatSelector(r=r, n=n, convention=Convention.DESCENDING)
    finest = GridSpec(t0=0.0, t1=T, m=m).refined(refinement)
    sampler = _sup_sampler(model, finest, method)
    level_sups, diagnostics = _running_sups(
        sampler, sel, strides, n_reps, seed, workers, chunk_size
    )
    return _ks_report(
        level_sups,
        lambda sups: norming.a * (sups - norming.b),
        stats.gumbel_r.cdf,
        LimitTarget.GUMBEL,
        norming,
        extrapolate,
        diagnostics=diagnostics,
    )


def _mixture_sups(
    rho: float,
    n: int,
    r: int,
    T: float,
    n_reps: int,
    base_model: CorrelationModel,
    seed: int,
    segment_m: int,
    refinement: int,
    method: SamplingMethod | None,
    workers: int | None,
    chunk_size: int | None,
) -> tuple[np.ndarray, dict[str, float]]:
    """
    sup over [0, T] of sqrt(1 - rho) Y_{r:n} + sqrt(rho) W on each nested
    segment grid, where Y runs an independent copy of the base process on
    every unit segment [k - 1, k) and W is one standard normal per
    replication.
    """
    if segment_m < 2:
        raise InputValidationError(f"segment grid needs m >= 2, got {segment_m}")
    strides = _check_refinement(refinement)
    sel = OrderStatSelector(r=r, n=n, convention=Convention.DESCENDING)
    finest = GridSpec(t0=0.0, t1=1.0, m=segment_m).refined(refinement)
    sampler = _sup_sampler(base_model, finest, method)
    segments = int(ceil(T))
    # the last segment is cut at T
    cut = T - (segments - 1) + 1e-12
    tails = [int(np.sum(finest.points[::s] <= cut)) for s in strides]
    per_rep = segments * n * finest.m

    def job(index: int, size: int) -> np.ndarray:
        rng = substream(seed, index)
        block = sampler.draw(rng, size * segments * n)
        block = block.reshape(size, segments, n, finest.m)
        process = order_stat_values(block, sel)
        shared = np.sqrt(rho) * rng.standard_normal(size)
        rows = []
        for stride, tail in zip(strides, tails):
            coarse = process[..., ::stride]
            y_sup = np.max(coarse[:, -1, :tail], axis=-1)
            if segments > 1:
                y_sup = np.maximum(y_sup, np.max(coarse[:, :-1, :], axis=(-2, -1)))
            rows.append(np.sqrt(1.0 - rho) * y_sup + shared)
        return np.stack(rows)

    sizes = chunk_sizes(n_reps, replication_chunk(per_rep, chunk_size))
    level_sups = np.concatenate(ChunkRunner(workers).map_chunks(job, sizes), axis=1)
    return level_sups, sampler.diagnostics()


def _default_segment_m() -> int:
    return 2 ** max(app_settings.GRID_EXPONENT - MIXTURE_REFINEMENT, 1) + 1


def mixed_gumbel_experiment(
    gamma: float,
    n: int,
    r: int,
    T: float,
    n_reps: int,
    base_model: CorrelationModel,
    A_const: float,
    seed: int,
    segment_m: int | None = None,
    refinement: int = MIXTURE_REFINEMENT,
    extrapolate: bool = True,
    method: SamplingMethod | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> LimitCheckReport:
    """
    KS check of a (sup - b) against the mixed Gumbel law for the mixture
    construction with rho_*(T) = gamma / ln T.
    """
    if not gamma > 0.0:
        raise InputValidationError(f"gamma must be positive, got {gamma}")
    base_model = _stationary_model(base_model)
    _check_reps(n_reps)
    seed = check_seed(seed)
    rho = gamma / np.log(T) if T > 1.0 else np.inf
    if not rho < 1.0:
        raise InputValidationError(f"rho_* = gamma / ln T = {rho} must be < 1")
    horizon = _effective_horizon(base_model, T)
    norming = norming_constants(n, r, base_model.index, horizon, A_const)
    level_sups, diagnostics = _mixture_sups(
        rho,
        n,
        r,
        T,
        n_reps,
        base_model,
        seed,
        segment_m or _default_segment_m(),
        refinement,
        method,
        workers,
        chunk_size,
    )
    return _ks_report(
        level_sups,
        lambda sups: norming.a * (sups - norming.b),
        lambda x: mixed_gumbel_cdf(x, gamma, r),
        LimitTarget.MIXED_GUMBEL,
        norming,
        extrapolate,
        gamma=gamma,
        rho_t=float(rho),
        diagnostics=diagnostics,
    )


def normal_limit_experiment(
    rho_T: float,
    n: int,
    r: int,
    T: float,
    n_reps: int,
    base_model: CorrelationModel,
    A_const: float,
    seed: int,
    segment_m: int | None = None,
    refinement: int = MIXTURE_REFINEMENT,
    extrapolate: bool = True,
    method: SamplingMethod | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> LimitCheckReport:
    """
    KS check of (sup - sqrt(1 - rho_T) b) / sqrt(rho_T) against Phi for the
    mixture construction with the supplied rho_T.
    """
    if not 0.0 < rho_T < 1.0:
        raise InputValidationError(f"rho_T must lie in (0, 1), got {rho_T}")
    base_model = _stationary_model(base_model)
    _check_reps(n_reps)
    seed = check_seed(seed)
    horizon = _effective_horizon(base_model, T)
    norming = norming_constants(n, r, base_model.index, horizon, A_const)
    advisories = []
    if rho_T * np.log(T) < NORMAL_ADVISORY_GATE:
        message = (
            f"rho_T ln T = {rho_T * np.log(T):.3g} < {NORMAL_ADVISORY_GATE}: "
            "outside the strong dependence regime"
        )
        logger.warning(message)
        advisories.append(message)
    level_sups, diagnostics = _mixture_sups(
        rho_T,
        n,
        r,
        T,
        n_reps,
        base_model,
        seed,
        segment_m or _default_segment_m(),
        refinement,
        method,
        workers,
        chunk_size,
    )
    return _ks_report(
        level_sups,
        lambda sups: (sups - np.sqrt(1.0 - rho_T) * norming.b) / np.sqrt(rho_T),
        std_normal_cdf,
        LimitTarget.NORMAL,
        norming,
        extrapolate,
        rho_t=rho_T,
        advisories=advisories,
        diagnostics=diagnostics,
    )
