import csv
import json
from pathlib import Path

import numpy as np

from core.exceptions import InputValidationError
from core.logging_config import setup_logger
from models.gaussian_array import GaussianArraySpec, ShapeMismatchError

logger = setup_logger()


def validate_spec(d: int, n: int, cov_matrix) -> GaussianArraySpec:
    """
    Build a validated standard Gaussian array specification.

    :param d: Row count
    :type d: int
    :param n: Column count
    :type n: int
    :param cov_matrix: dn x dn correlation matrix (nested sequences or array)
    :return: Validated specification
    :rtype: GaussianArraySpec
    :raises CovarianceValidationError: listing every violated invariant
    """
    return GaussianArraySpec(d=d, n=n, cov=cov_matrix)


def check_same_shape(spec_x: GaussianArraySpec, spec_y: GaussianArraySpec) -> None:
    if not spec_x.same_shape(spec_y):
        raise ShapeMismatchError(
            f"array shapes differ: ({spec_x.d}, {spec_x.n}) vs ({spec_y.d}, {spec_y.n})"
        )


def pairwise_max_corr(
    spec_x: GaussianArraySpec, spec_y: GaussianArraySpec
) -> np.ndarray:
    """
    Entrywise rho_{ij,lk} = max(|sigma0_{ij,lk}|, |sigma1_{ij,lk}|).

    :param spec_x: Array supplying sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array supplying sigma^(0)
    :type spec_y: GaussianArraySpec
    :return: dn x dn matrix with unit diagonal
    :rtype: np.ndarray
    """
    check_same_shape(spec_x, spec_y)
    return np.maximum(np.abs(spec_x.cov), np.abs(spec_y.cov))


def interpolate_covariance(
    spec_x: GaussianArraySpec, spec_y: GaussianArraySpec, h: float
) -> GaussianArraySpec:
    """
    Convex combination h * Sigma^(1) + (1 - h) * Sigma^(0).

    :param spec_x: Array supplying Sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array supplying Sigma^(0)
    :type spec_y: GaussianArraySpec
    :param h: Interpolation weight in [0, 1]
    :type h: float
    :return: Interpolated specification
    :rtype: GaussianArraySpec
    """
    check_same_shape(spec_x, spec_y)
    if not 0.0 <= h <= 1.0:
        raise InputValidationError(f"interpolation weight h={h} outside [0, 1]")
    cov = h * spec_x.cov + (1.0 - h) * spec_y.cov
    # keep the diagonal exact, the combination only rounds off-diagonal entries
    np.fill_diagonal(cov, 1.0)
    return validate_spec(spec_x.d, spec_x.n, cov)


def within_row_mask(spec: GaussianArraySpec) -> np.ndarray:
    """
    Pairs (ij, ik) with j < k.
    """
    rows, cols = spec.row_index, spec.col_index
    return (rows[:, None] == rows[None, :]) & (cols[:, None] < cols[None, :])


def same_row_mask(spec: GaussianArraySpec) -> np.ndarray:
    rows = spec.row_index
    return rows[:, None] == rows[None, :]


def cross_row_mask(spec: GaussianArraySpec) -> np.ndarray:
    """
    Pairs (ij, lk) with i < l and any j, k.
    """
    rows = spec.row_index
    return rows[:, None] < rows[None, :]


def read_cov_json(path: Path) -> list:
    """
    Read a covariance matrix stored as JSON nested arrays, either bare or under
    the key "cov".

    :param path: JSON file
    :type path: Path
    :return: Matrix rows
    :rtype: list
    """
    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as e:
            raise InputValidationError(f"{path}: malformed JSON: {e}") from e
    if isinstance(payload, dict):
        payload = payload.get("cov")
        if payload is None:
            raise InputValidationError(f"{path}: JSON object without a 'cov' key")
    if not isinstance(payload, list):
        raise InputValidationError(
            f"{path}: covariance must be nested arrays, got {type(payload).__name__}"
        )
    logger.debug(f"Loaded covariance JSON {path}")
    return payload


def read_cov_csv(path: Path) -> list:
    """
    Read a square covariance matrix from CSV. A non-numeric first row is
    treated as a header and skipped.

    :param path: CSV file
    :type path: Path
    :return: Matrix rows
    :rtype: list
    """
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if rows:
        try:
            [float(cell) for cell in rows[0]]
        except ValueError:
            rows = rows[1:]
    try:
        matrix = [[float(cell) for cell in row] for row in rows]
    except ValueError as e:
        raise InputValidationError(f"{path}: non-numeric covariance entry: {e}") from e
    logger.debug(f"Loaded covariance CSV {path} with {len(matrix)} rows")
    return matrix


def load_cov_file(path: Path, d: int, n: int | None = None) -> GaussianArraySpec:
    """
    Load and validate a covariance file, CSV by suffix and JSON otherwise.

    :param path: Covariance file
    :type path: Path
    :param d: Row count
    :type d: int
    :param n: Column count, inferred from the matrix size when None
    :type n: int | None
    :return: Validated specification
    :rtype: GaussianArraySpec
    """
    path = Path(path)
    if not path.exists():
        raise InputValidationError(f"covariance file not found: {path}")
    reader = read_cov_csv if path.suffix.lower() == ".csv" else read_cov_json
    matrix = reader(path)
    if n is None:
        n, rest = divmod(len(matrix), d)
        if rest or n == 0:
            raise ShapeMismatchError(
                f"{path}: {len(matrix)} matrix rows do not split into d={d} array rows"
            )
    return validate_spec(d, n, matrix)
