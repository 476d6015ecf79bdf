import numpy as np
from scipy import integrate, special

from core.exceptions import InputValidationError

SQRT_2PI = np.sqrt(2.0 * np.pi)
H_FUNCTION_MAX_ABS = 37.0
BIVARIATE_CDF_TOL = 1e-13


class CorrelationRangeError(InputValidationError):
    """
    Raised when a correlation lies outside the range an operation accepts.
    """


def std_normal_pdf(x):
    """
    Standard normal density.

    :param x: Scalar or array
    :return: (2 pi)^(-1/2) exp(-x^2 / 2)
    """
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def std_normal_cdf(x):
    """
    Standard normal distribution function, accurate in both tails.

    :param x: Scalar or array
    :return: Phi(x)
    """
    return special.ndtr(np.asarray(x, dtype=float))


def _mills_ratio_left(x):
    # Phi(x) / phi(x), stable for very negative x
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.pi / 2.0) * special.erfcx(-x / np.sqrt(2.0))


def plus_mean(x):
    """
    E[(N + x)_+] = phi(x) + x Phi(x) for N standard normal.

    :param x: Scalar or array
    :return: Truncated mean, nonnegative and increasing
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        left = std_normal_pdf(x) * (1.0 + x * _mills_ratio_left(x))
        right = std_normal_pdf(x) + x * std_normal_cdf(x)
    value = np.where(x < 0.0, left, right)
    return np.maximum(value, 0.0)


def h_function(x):
    """
    H(x) = sqrt(2 pi) exp(x^2 / 2) E[(N + x)_+] = 1 + x Phi(x) / phi(x).

    :param x: Scalar or array with |x| <= 37
    :return: H(x)
    :raises InputValidationError: when |x| exceeds the overflow guard
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > H_FUNCTION_MAX_ABS):
        raise InputValidationError(
            f"h_function argument outside [-{H_FUNCTION_MAX_ABS}, {H_FUNCTION_MAX_ABS}]"
        )
    return 1.0 + x * _mills_ratio_left(x)


def bivariate_pdf(x, y, rho: float):
    """
    Density of a standard bivariate normal pair with correlation rho, |rho| < 1.
    """
    if not abs(rho) < 1.0:
        raise CorrelationRangeError(f"bivariate_pdf needs |rho| < 1, got {rho}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    det = 1.0 - rho * rho
    quad_form = (x * x - 2.0 * rho * x * y + y * y) / det
    return np.exp(-0.5 * quad_form) / (2.0 * np.pi * np.sqrt(det))


def bivariate_cdf(x: float, y: float, rho: float) -> float:
    """
    Phi_2(x, y; rho) through Plackett's identity

        Phi_2(x, y; rho) = Phi(x) Phi(y) + int_0^rho phi_2(x, y; s) ds

    integrated in theta = arcsin(s), where the integrand stays bounded up to
    |rho| = 1.

    :param x: Upper limit of the first coordinate
    :type x: float
    :param y: Upper limit of the second coordinate
    :type y: float
    :param rho: Correlation in [-1, 1]
    :type rho: float
    :return: P(X <= x, Y <= y)
    :rtype: float
    """
    if not -1.0 <= rho <= 1.0:
        raise CorrelationRangeError(f"correlation {rho} outside [-1, 1]")
    px, py = float(std_normal_cdf(x)), float(std_normal_cdf(y))
    if rho == 1.0:
        return min(px, py)
    if rho == -1.0:
        return max(0.0, px + py - 1.0)
    if rho == 0.0 or not (np.isfinite(x) and np.isfinite(y)):
        return px * py

    def integrand(theta: float) -> float:
        s = np.sin(theta)
        c2 = np.cos(theta) ** 2
        return np.exp(-(x * x - 2.0 * x * y * s + y * y) / (2.0 * c2))

    upper = float(np.arcsin(rho))
    correction, _ = integrate.quad(
        integrand,
        0.0,
        upper,
        epsabs=BIVARIATE_CDF_TOL,
        epsrel=BIVARIATE_CDF_TOL,
        limit=200,
    )
    value = px * py + correction / (2.0 * np.pi)
    return float(min(max(value, 0.0), 1.0))
