import csv
from pathlib import Path

import numpy as np

from controllers.chunk_runner import ChunkRunner
from core.config import app_settings
from core.exceptions import ComputationError, InputValidationError
from core.logging_config import setup_logger
from helpers.kernels import gram_matrix, self_similar_kernel, stationary_corr
from helpers.linalg import (
    EIGENVALUE_PSD_TOL,
    cholesky_with_jitter,
    min_relative_eigenvalue,
)
from helpers.streams import check_seed, chunk_sizes, substream
from models.gaussian_array import OrderStatSelector
from models.paths import (
    CorrelationModel,
    GridSpec,
    ModelKind,
    SampledPath,
    SamplingMethod,
    Spacing,
)

logger = setup_logger()

EXPONENTIAL_GRID_TOL = 1e-9


class CirculantEmbeddingError(ComputationError):
    """
    Raised when the circulant embedding has a significantly negative eigenvalue.
    """


class UnsupportedMethodError(InputValidationError):
    """
    Raised when a sampling method does not apply to a model or grid.
    """


class GridMismatchError(InputValidationError):
    """
    Raised when paths that must share a grid do not.
    """


def exponential_grid(s_grid: GridSpec) -> GridSpec:
    """
    The grid {exp(s_k)} for a uniform s-grid, as needed by lamperti_dual.

    :param s_grid: Uniform grid of dual times
    :type s_grid: GridSpec
    :return: Exponential grid of the same size
    :rtype: GridSpec
    """
    if s_grid.spacing != Spacing.UNIFORM:
        raise InputValidationError("exponential_grid needs a uniform s-grid")
    return GridSpec(
        t0=float(np.exp(s_grid.t0)),
        t1=float(np.exp(s_grid.t1)),
        m=s_grid.m,
        spacing=Spacing.EXPONENTIAL,
    )


def dual_correlation(model: CorrelationModel, lags) -> np.ndarray:
    """
    Correlation of the Lamperti dual X*(t) = exp(-alpha t / 2) X(exp(t)) of a
    self-similar model, rho*(t) = exp(-alpha |t| / 2) K(exp(|t|), 1).

    :param model: Self-similar model
    :type model: CorrelationModel
    :param lags: Time lags
    :return: Dual correlations
    :rtype: np.ndarray
    """
    if not model.self_similar:
        raise InputValidationError(
            f"dual correlation needs a self-similar model, got {model.kind.value}"
        )
    lags = np.abs(np.asarray(lags, dtype=float))
    kernel = self_similar_kernel(model, np.exp(lags), 1.0)
    return np.exp(-model.index * lags / 2.0) * kernel


def _circulant_eigenvalues(
    sequence: np.ndarray, tolerance: float
) -> tuple[np.ndarray, int]:
    # minimal embedding of the first row r_0..r_{m-1}
    row = np.concatenate([sequence, sequence[-2:0:-1]])
    eigenvalues = np.fft.fft(row).real
    largest = float(np.max(eigenvalues))
    smallest = float(np.min(eigenvalues))
    if smallest < -tolerance * largest:
        logger.error(f"Circulant eigenvalue {smallest:.3e} vs max {largest:.3e}")
        raise CirculantEmbeddingError(
            f"circulant embedding not nonnegative (min eigenvalue {smallest:.3e}, "
            f"max {largest:.3e}); use --method cholesky"
        )
    clipped = int(np.sum(eigenvalues < 0.0))
    if clipped:
        logger.warning(f"Clipped {clipped} small negative circulant eigenvalues to 0")
    return np.clip(eigenvalues, 0.0, None), clipped


class PathSampler:
    """
    Exact sampler for a Gaussian process on a fixed grid.

    The factor (Cholesky or circulant spectrum) is computed once at
    construction and only read afterwards.

    With dual=True the model must be self-similar and the sampler draws its
    stationary Lamperti dual on the grid directly.
    """

    def __init__(
        self,
        model: CorrelationModel,
        grid: GridSpec,
        method: SamplingMethod = SamplingMethod.CHOLESKY,
        dual: bool = False,
        circulant_tol: float | None = None,
    ):
        self.model = model
        self.grid = grid
        self.method = SamplingMethod(method)
        self.dual = dual
        self.jitter = 0.0
        self.clipped = 0
        if dual and not model.self_similar:
            raise InputValidationError("dual sampling needs a self-similar model")
        if model.self_similar and not dual and grid.t0 < 0.0:
            raise InputValidationError(
                f"self-similar paths need times >= 0, grid starts at {grid.t0}"
            )
        tolerance = (
            app_settings.CIRCULANT_TOLERANCE if circulant_tol is None else circulant_tol
        )
        if self.method == SamplingMethod.CIRCULANT:
            self._build_circulant(tolerance)
        else:
            self._build_cholesky()
        logger.debug(f"Built {self.method.value} sampler for {self.label}, m={grid.m}")

    @property
    def label(self) -> str:
        return ("dual " if self.dual else "") + self.model.describe()

    def _stationary(self, lags) -> np.ndarray:
        if self.dual:
            return dual_correlation(self.model, lags)
        return stationary_corr(self.model, lags)

    def covariance(self) -> np.ndarray:
        points = self.grid.points
        if self.dual or self.model.stationary:
            return self._stationary(points[:, None] - points[None, :])
        return gram_matrix(self.model, points)

    def _build_cholesky(self) -> None:
        cov = self.covariance()
        if self.model.kind == ModelKind.CUSTOM_TABLE and not self.dual:
            ratio = min_relative_eigenvalue(cov)
            if ratio < -EIGENVALUE_PSD_TOL:
                raise InputValidationError(
                    f"custom correlation table is not PSD on this grid "
                    f"(min/max eigenvalue {ratio:.3e})"
                )
        # X(0) = 0 for self-similar models: factorize the positive-variance block
        self.active = np.flatnonzero(np.diag(cov) > 0.0)
        block = cov[np.ix_(self.active, self.active)]
        self.factor, self.jitter = cholesky_with_jitter(block)

    def _build_circulant(self, tolerance: float) -> None:
        if self.grid.spacing != Spacing.UNIFORM:
            raise UnsupportedMethodError("circulant sampling needs a uniform grid")
        steps = np.arange(self.grid.m)
        h = self.grid.step
        if self.dual or self.model.stationary:
            self.increments = False
            sequence = self._stationary(steps * h)
        elif self.model.kind == ModelKind.FBM:
            if self.grid.t0 != 0.0:
                raise UnsupportedMethodError("circulant fbm needs a grid starting at 0")
            # fractional Gaussian noise autocovariance at step h
            self.increments = True
            alpha = self.model.alpha
            k = steps[:-1].astype(float)
            sequence = (
                0.5
                * h**alpha
                * (np.abs(k + 1) ** alpha - 2.0 * k**alpha + np.abs(k - 1) ** alpha)
            )
        else:
            raise UnsupportedMethodError(
                f"circulant sampling does not apply to {self.model.kind.value}; "
                "use cholesky"
            )
        if len(sequence) < 2:
            # one increment: no embedding needed
            self.spectrum = None
            self.scale = float(np.sqrt(sequence[0]))
            return
        eigenvalues, self.clipped = _circulant_eigenvalues(sequence, tolerance)
        self.size = len(sequence)
        self.spectrum = np.sqrt(eigenvalues / len(eigenvalues))

    def _draw_circulant(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.spectrum is None:
            values = self.scale * rng.standard_normal((count, 1))
        else:
            width = len(self.spectrum)
            noise = rng.standard_normal((count, width)) + 1j * rng.standard_normal(
                (count, width)
            )
            values = np.fft.fft(self.spectrum * noise, axis=-1).real[:, : self.size]
        if self.increments:
            start = np.zeros((count, 1))
            return np.concatenate([start, np.cumsum(values, axis=-1)], axis=-1)
        return values

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """
        Draw count paths as a (count, m) block.

        :param rng: Generator of the substream
        :type rng: np.random.Generator
        :param count: Number of paths
        :type count: int
        :return: Path values on the grid
        :rtype: np.ndarray
        """
        if self.method == SamplingMethod.CIRCULANT:
            return self._draw_circulant(rng, count)
        values = np.zeros((count, self.grid.m))
        normals = rng.standard_normal((count, len(self.active)))
        values[:, self.active] = normals @ self.factor.T
        return values

    def diagnostics(self) -> dict[str, float]:
        return {"jitter": self.jitter, "circulant_clipped": float(self.clipped)}


def sample_paths(
    model: CorrelationModel,
    grid: GridSpec,
    n_paths: int,
    seed: int,
    method: SamplingMethod = SamplingMethod.CHOLESKY,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> list[SampledPath]:
    """
    Sample n_paths independent paths of the model on the grid.

    Path k is a function of (seed, chunk size, k) only.

    :param model: Correlation model
    :type model: CorrelationModel
    :param grid: Time grid
    :type grid: GridSpec
    :param n_paths: Number of paths
    :type n_paths: int
    :param seed: Run seed
    :type seed: int
    :param method: cholesky or circulant
    :type method: SamplingMethod
    :param workers: Worker threads
    :type workers: int | None
    :param chunk_size: Paths per substream
    :type chunk_size: int | None
    :return: Sampled paths
    :rtype: list[SampledPath]
    """
    if n_paths < 1:
        raise InputValidationError(f"n_paths must be positive, got {n_paths}")
    seed = check_seed(seed)
    sampler = PathSampler(model, grid, method)
    sizes = chunk_sizes(n_paths, chunk_size or app_settings.CHUNK_SIZE)
    blocks = ChunkRunner(workers).map_chunks(
        lambda index, size: sampler.draw(substream(seed, index), size), sizes
    )
    return [
        SampledPath(grid=grid, values=row, label=sampler.label)
        for block in blocks
        for row in block
    ]


def lamperti_dual(path: SampledPath, alpha: float) -> SampledPath:
    """
    X*(s) = exp(-alpha s / 2) X(exp(s)) on the uniform s-grid underlying an
    exponential time grid.

    :param path: Path of a self-similar process on an exponential grid
    :type path: SampledPath
    :param alpha: Self-similarity index
    :type alpha: float
    :return: Dual path on the s-grid
    :rtype: SampledPath
    """
    points = path.grid.points
    if np.any(points <= 0.0):
        raise InputValidationError("lamperti_dual needs strictly positive times")
    s_values = np.log(points)
    gaps = np.diff(s_values)
    spacing = float(np.mean(gaps))
    if np.max(np.abs(gaps - spacing)) > EXPONENTIAL_GRID_TOL * max(abs(spacing), 1.0):
        raise InputValidationError("grid is not exponential within 1e-9 relative")
    s_grid = GridSpec(t0=float(s_values[0]), t1=float(s_values[-1]), m=path.grid.m)
    values = np.exp(-alpha * s_grid.points / 2.0) * path.values
    return SampledPath(grid=s_grid, values=values, label=f"lamperti({path.label})")


def order_stat_values(block: np.ndarray, sel: OrderStatSelector) -> np.ndarray:
    """
    Pointwise order statistic across the path axis of a (..., n, m) block.
    """
    if block.shape[-2] != sel.n:
        raise InputValidationError(
            f"selector expects n={sel.n} paths, got {block.shape[-2]}"
        )
    return np.sort(block, axis=-2)[..., sel.ascending_rank - 1, :]


def order_stat_path(paths: list[SampledPath], sel: OrderStatSelector) -> SampledPath:
    """
    Pointwise r-th order statistic of n paths sharing one grid.

    :param paths: n paths
    :type paths: list[SampledPath]
    :param sel: Rank and convention
    :type sel: OrderStatSelector
    :return: Order-statistics path
    :rtype: SampledPath
    """
    if not paths:
        raise InputValidationError("order_stat_path needs at least one path")
    grid = paths[0].grid
    if any(path.grid != grid for path in paths[1:]):
        raise GridMismatchError("order_stat_path needs paths on a common grid")
    block = np.stack([path.values for path in paths])
    return SampledPath(
        grid=grid,
        values=order_stat_values(block, sel),
        label=f"order_stat(r={sel.r}, {sel.convention.value}, n={sel.n})",
    )


def sup_indicator(path: SampledPath, level: float) -> bool:
    """
    Grid proxy for {sup_t X(t) <= level}. The grid max never exceeds the
    continuous sup, so frequencies of this event are biased upward.
    """
    return bool(np.max(path.values) <= level)


def dump_paths_csv(paths: list[SampledPath], file: Path) -> None:
    """
    Write paths in long format with columns t, value, path_id.
    """
    with open(file, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "value", "path_id"])
        for path_id, path in enumerate(paths):
            for t, value in zip(path.grid.points, path.values):
                writer.writerow([repr(float(t)), repr(float(value)), path_id])
    logger.info(f"Dumped {len(paths)} paths to {file}")


PATH_VALUES_PER_CHUNK = 2**22


def replication_chunk(values_per_rep: int, chunk_size: int | None = None) -> int:
    """
    Replications per substream chunk, capped so one chunk holds at most
    PATH_VALUES_PER_CHUNK path values unless chunk_size is given.
    """
    if chunk_size:
        return chunk_size
    return max(1, min(app_settings.CHUNK_SIZE, PATH_VALUES_PER_CHUNK // values_per_rep))


def default_method(
    model: CorrelationModel, grid: GridSpec, dual: bool = False
) -> SamplingMethod:
    """
    Circulant embedding where it applies, Cholesky otherwise.
    """
    if grid.spacing != Spacing.UNIFORM:
        return SamplingMethod.CHOLESKY
    if dual or model.stationary:
        return SamplingMethod.CIRCULANT
    if model.kind == ModelKind.FBM and grid.t0 == 0.0:
        return SamplingMethod.CIRCULANT
    return SamplingMethod.CHOLESKY
