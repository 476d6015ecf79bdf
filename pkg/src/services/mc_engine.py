from collections.abc import Iterator
from math import ceil

import numpy as np

from controllers.chunk_runner import ChunkRunner
from core.config import app_settings
from core.exceptions import ComputationError, InputValidationError
from core.logging_config import setup_logger
from helpers.covariance import check_same_shape
from helpers.linalg import cholesky_with_jitter
from helpers.special_fn import bivariate_cdf, std_normal_cdf
from helpers.streams import check_seed, chunk_sizes, substream
from models.gaussian_array import (
    GaussianArraySpec,
    OrderStatSelector,
    ShapeMismatchError,
    ThresholdVector,
)
from models.mc_estimate import McEstimate

logger = setup_logger()

MIN_SAMPLES = 100
MIN_RATIO_HITS = 10

# stream coordinates, the first spawn key of every substream
SIDE_SHARED = 0
SIDE_X = 1
SIDE_Y = 2


class UnsupportedShapeError(InputValidationError):
    """
    Raised when the closed-form oracle is asked for an array shape it does not cover.
    """


class StarvedRatioError(ComputationError):
    """
    Raised when one side of a ratio estimate has too few hits for a stable log.
    """

    def __init__(self, side: str, p_hat: float, floor: float):
        self.side = side
        super().__init__(
            f"side {side} starved: p_hat={p_hat:.3e} below {floor:.3e}, "
            "raise the sample budget or move the thresholds"
        )


class ArraySampler:
    """
    Cholesky-based sampler for one Gaussian array. The factor is computed once
    and only read afterwards, so one instance can serve many workers.
    """

    def __init__(self, spec: GaussianArraySpec):
        self.spec = spec
        self.factor, self.jitter = cholesky_with_jitter(np.asarray(spec.cov))

    def transform(self, normals: np.ndarray) -> np.ndarray:
        """
        Map i.i.d. standard normals of shape (count, dn) to arrays (count, d, n).
        """
        correlated = normals @ self.factor.T
        return correlated.reshape(-1, self.spec.d, self.spec.n)

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.transform(rng.standard_normal((count, self.spec.size)))


def order_stat_vector(sample: np.ndarray, sel: OrderStatSelector) -> np.ndarray:
    """
    Per-row r-th order statistic of one array (d, n) or a batch (..., d, n).

    :param sample: Array sample(s)
    :type sample: np.ndarray
    :param sel: Rank and convention
    :type sel: OrderStatSelector
    :return: Vector(s) of length d
    :rtype: np.ndarray
    """
    sample = np.asarray(sample, dtype=float)
    if sample.shape[-1] != sel.n:
        raise ShapeMismatchError(
            f"selector expects n={sel.n} columns, sample has {sample.shape[-1]}"
        )
    return np.sort(sample, axis=-1)[..., sel.ascending_rank - 1]


def sample_array(
    spec: GaussianArraySpec,
    seed: int,
    count: int,
    chunk_size: int | None = None,
) -> Iterator[np.ndarray]:
    """
    Stream count samples of the array, each a (d, n) matrix.

    Sample k only depends on (seed, k) for a fixed chunk size.

    :param spec: Array specification
    :type spec: GaussianArraySpec
    :param seed: Run seed
    :type seed: int
    :param count: Number of samples
    :type count: int
    :param chunk_size: Samples per substream, defaults to CHUNK_SIZE
    :type chunk_size: int | None
    :return: Iterator over samples
    :rtype: Iterator[np.ndarray]
    """
    sampler = ArraySampler(spec)
    chunk_size = chunk_size or app_settings.CHUNK_SIZE
    for index, size in enumerate(chunk_sizes(count, chunk_size)):
        yield from sampler.draw(substream(seed, SIDE_SHARED, index), size)


def _check_inputs(
    spec: GaussianArraySpec, sel: OrderStatSelector, u: ThresholdVector, n_samples: int
) -> np.ndarray:
    if n_samples < MIN_SAMPLES:
        raise InputValidationError(f"n_samples={n_samples} below {MIN_SAMPLES}")
    if sel.n != spec.n:
        raise ShapeMismatchError(f"selector n={sel.n} but array has n={spec.n}")
    return u.check_length(spec.d)


def _prob_le(
    sampler: ArraySampler,
    sel: OrderStatSelector,
    thresholds: np.ndarray,
    n_samples: int,
    seed: int,
    side: int,
    runner: ChunkRunner,
    chunk_size: int,
    antithetic: bool,
) -> McEstimate:
    def hits(arrays: np.ndarray) -> np.ndarray:
        return np.all(order_stat_vector(arrays, sel) <= thresholds, axis=-1)

    def job(index: int, size: int) -> tuple[int, int, int]:
        rng = substream(seed, side, index)
        normals = rng.standard_normal((size, sampler.spec.size))
        count = hits(sampler.transform(normals)).astype(np.int64)
        if antithetic:
            count = count + hits(sampler.transform(-normals)).astype(np.int64)
        return size, int(count.sum()), int((count * count).sum())

    units = ceil(n_samples / 2) if antithetic else n_samples
    tallies = runner.map_chunks(job, chunk_sizes(units, chunk_size))
    total = sum(t[0] for t in tallies)
    hit_sum = sum(t[1] for t in tallies)
    hit_sq = sum(t[2] for t in tallies)

    if antithetic:
        # pair averages k/2 with k in {0, 1, 2}
        mean = hit_sum / (2.0 * total)
        var = max(hit_sq / 4.0 - total * mean * mean, 0.0) / max(total - 1, 1)
        stderr = float(np.sqrt(var / total))
        drawn = 2 * total
    else:
        mean = hit_sum / total
        stderr = float(np.sqrt(mean * (1.0 - mean) / total))
        drawn = total
    return McEstimate(
        value=mean,
        stderr=stderr,
        n_samples=drawn,
        seed=seed,
        diagnostics={"jitter": sampler.jitter},
    )


def estimate_prob_le(
    spec: GaussianArraySpec,
    sel: OrderStatSelector,
    u: ThresholdVector,
    n_samples: int,
    seed: int,
    workers: int | None = None,
    chunk_size: int | None = None,
    antithetic: bool | None = None,
) -> McEstimate:
    """
    Estimate P{X_(r) <= u} componentwise.

    :param spec: Array specification
    :type spec: GaussianArraySpec
    :param sel: Rank and convention
    :type sel: OrderStatSelector
    :param u: Thresholds, one per row
    :type u: ThresholdVector
    :param n_samples: Sample budget, at least 100
    :type n_samples: int
    :param seed: Run seed
    :type seed: int
    :param workers: Worker threads
    :type workers: int | None
    :param chunk_size: Units per substream, defaults to CHUNK_SIZE
    :type chunk_size: int | None
    :param antithetic: Pair z with -z, defaults to ANTITHETIC
    :type antithetic: bool | None
    :return: Probability estimate with its standard error
    :rtype: McEstimate
    """
    thresholds = _check_inputs(spec, sel, u, n_samples)
    return _prob_le(
        ArraySampler(spec),
        sel,
        thresholds,
        n_samples,
        check_seed(seed),
        SIDE_SHARED,
        ChunkRunner(workers),
        chunk_size or app_settings.CHUNK_SIZE,
        app_settings.ANTITHETIC if antithetic is None else antithetic,
    )


def _paired_estimates(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    sel: OrderStatSelector,
    u: ThresholdVector,
    n_samples: int,
    seed: int,
    workers: int | None,
    chunk_size: int | None,
    antithetic: bool | None,
    crn: bool,
) -> tuple[McEstimate, McEstimate]:
    check_same_shape(spec_x, spec_y)
    thresholds = _check_inputs(spec_x, sel, u, n_samples)
    seed = check_seed(seed)
    runner = ChunkRunner(workers)
    chunk_size = chunk_size or app_settings.CHUNK_SIZE
    antithetic = app_settings.ANTITHETIC if antithetic is None else antithetic
    if crn:
        logger.info("Common random numbers enabled: stderr is conservative")
    side_x, side_y = (SIDE_SHARED, SIDE_SHARED) if crn else (SIDE_X, SIDE_Y)
    estimates = tuple(
        _prob_le(
            ArraySampler(spec),
            sel,
            thresholds,
            n_samples,
            seed,
            side,
            runner,
            chunk_size,
            antithetic,
        )
        for spec, side in ((spec_x, side_x), (spec_y, side_y))
    )
    return estimates


def estimate_delta(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    sel: OrderStatSelector,
    u: ThresholdVector,
    n_samples: int,
    seed: int,
    workers: int | None = None,
    chunk_size: int | None = None,
    antithetic: bool | None = None,
    crn: bool = False,
) -> McEstimate:
    """
    Estimate Delta_(r)(u) = P{X_(r) <= u} - P{Y_(r) <= u} from two independent
    streams, or from common random numbers when crn is set.

    :return: Difference estimate, stderr = sqrt(se_X^2 + se_Y^2)
    :rtype: McEstimate
    """
    p_x, p_y = _paired_estimates(
        spec_x, spec_y, sel, u, n_samples, seed, workers, chunk_size, antithetic, crn
    )
    return McEstimate(
        value=p_x.value - p_y.value,
        stderr=float(np.hypot(p_x.stderr, p_y.stderr)),
        n_samples=p_x.n_samples,
        seed=seed,
        diagnostics={
            "p_x": p_x.value,
            "p_y": p_y.value,
            "jitter_x": p_x.diagnostics["jitter"],
            "jitter_y": p_y.diagnostics["jitter"],
        },
    )


def estimate_theta_log(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    sel: OrderStatSelector,
    u: ThresholdVector,
    n_samples: int,
    seed: int,
    workers: int | None = None,
    chunk_size: int | None = None,
    antithetic: bool | None = None,
    crn: bool = False,
) -> McEstimate:
    """
    Estimate ln Theta_(r)(u) = ln(P{X_(r) <= u} / P{Y_(r) <= u}) with a
    delta-method standard error.

    :raises StarvedRatioError: when either p_hat is below 10 / n_samples
    """
    p_x, p_y = _paired_estimates(
        spec_x, spec_y, sel, u, n_samples, seed, workers, chunk_size, antithetic, crn
    )
    floor = MIN_RATIO_HITS / n_samples
    for side, estimate in (("X", p_x), ("Y", p_y)):
        if estimate.value < floor:
            logger.error(f"Ratio estimate starved on side {side}")
            raise StarvedRatioError(side, estimate.value, floor)
    return McEstimate(
        value=float(np.log(p_x.value / p_y.value)),
        stderr=float(np.hypot(p_x.stderr / p_x.value, p_y.stderr / p_y.value)),
        n_samples=p_x.n_samples,
        seed=seed,
        diagnostics={"p_x": p_x.value, "p_y": p_y.value},
    )


def exact_prob_small(
    spec: GaussianArraySpec, sel: OrderStatSelector, u: ThresholdVector
) -> float:
    """
    Closed-form P{X_(r) <= u} for arrays of shape 1x1, 2x1 or 1x2.

    :param spec: Array specification
    :type spec: GaussianArraySpec
    :param sel: Rank and convention
    :type sel: OrderStatSelector
    :param u: Thresholds
    :type u: ThresholdVector
    :return: Exact probability
    :rtype: float
    """
    values = u.check_length(spec.d)
    if sel.n != spec.n:
        raise ShapeMismatchError(f"selector n={sel.n} but array has n={spec.n}")
    if (spec.d, spec.n) == (1, 1):
        return float(std_normal_cdf(values[0]))
    rho = float(spec.cov[0, 1]) if spec.size == 2 else 0.0
    if (spec.d, spec.n) == (2, 1):
        return bivariate_cdf(values[0], values[1], rho)
    if (spec.d, spec.n) == (1, 2):
        both_below = bivariate_cdf(values[0], values[0], rho)
        if sel.ascending_rank == 2:
            return both_below
        return float(2.0 * std_normal_cdf(values[0]) - both_below)
    raise UnsupportedShapeError(
        f"no closed form for shape ({spec.d}, {spec.n}); supported: 1x1, 2x1, 1x2"
    )
