import numpy as np

from core.exceptions import ComputationError
from core.logging_config import setup_logger

logger = setup_logger()

JITTER_LADDER = (0.0, 1e-14, 1e-12, 1e-10)
EIGENVALUE_PSD_TOL = 1e-10


class CholeskyFailureError(ComputationError):
    """
    Raised when a covariance matrix cannot be factorized even at maximal jitter.
    """


def cholesky_with_jitter(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Lower Cholesky factor of cov, adding diagonal jitter from the ladder
    0, 1e-14, 1e-12, 1e-10 until factorization succeeds.

    :param cov: Symmetric positive semidefinite matrix
    :type cov: np.ndarray
    :return: Factor and the jitter that was used
    :rtype: tuple[np.ndarray, float]
    """
    identity = np.eye(cov.shape[0])
    for jitter in JITTER_LADDER:
        try:
            factor = np.linalg.cholesky(cov + jitter * identity)
        except np.linalg.LinAlgError:
            continue
        if jitter > 0.0:
            logger.warning(f"Cholesky needed diagonal jitter {jitter:.0e}")
        return factor, jitter
    logger.error(f"Cholesky failed at max jitter {JITTER_LADDER[-1]:.0e}")
    raise CholeskyFailureError(
        f"Cholesky factorization failed even with jitter {JITTER_LADDER[-1]:.0e}"
    )


def min_relative_eigenvalue(matrix: np.ndarray) -> float:
    """
    Smallest eigenvalue divided by the largest one.
    """
    eigenvalues = np.linalg.eigvalsh((matrix + matrix.T) / 2.0)
    return float(eigenvalues[0] / max(eigenvalues[-1], np.finfo(float).tiny))
