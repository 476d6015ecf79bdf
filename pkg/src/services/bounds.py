from math import comb

import numpy as np
from scipy import integrate

from core.config import app_settings
from core.exceptions import InputValidationError
from core.logging_config import setup_logger
from helpers.covariance import (
    check_same_shape,
    cross_row_mask,
    pairwise_max_corr,
    same_row_mask,
    within_row_mask,
)
from helpers.special_fn import SQRT_2PI, plus_mean
from models.bound_report import BoundKind, BoundReport, Condition
from models.gaussian_array import GaussianArraySpec, ThresholdVector

logger = setup_logger()

A_INTEGRAL_TOL = 1e-11


def _tolerance(tol: float | None) -> float:
    return app_settings.CONDITION_TOLERANCE if tol is None else tol


def _thresholds(spec: GaussianArraySpec, u: ThresholdVector) -> np.ndarray:
    values = u.check_length(spec.d)
    if np.any(np.isnan(values)):
        raise InputValidationError("threshold vector contains NaN")
    return values


def _arcsin_gap(spec_x: GaussianArraySpec, spec_y: GaussianArraySpec) -> np.ndarray:
    return np.arcsin(np.clip(spec_x.cov, -1.0, 1.0)) - np.arcsin(
        np.clip(spec_y.cov, -1.0, 1.0)
    )


def s_ind_holds(
    spec_x: GaussianArraySpec, spec_y: GaussianArraySpec, tol: float | None = None
) -> bool:
    """
    Both arrays share every within-row covariance.
    """
    mask = same_row_mask(spec_x)
    return bool(np.max(np.abs(spec_x.cov - spec_y.cov)[mask]) <= _tolerance(tol))


def column_independent(spec: GaussianArraySpec, tol: float | None = None) -> bool:
    """
    sigma_{ij,lk} = sigma_il I{j = k}: columns are i.i.d. copies of one d-vector.
    """
    tol = _tolerance(tol)
    rows, cols = spec.row_index, spec.col_index
    same_col = cols[:, None] == cols[None, :]
    expected = np.where(same_col, spec.row_block()[np.ix_(rows, rows)], 0.0)
    return bool(np.max(np.abs(spec.cov - expected)) <= tol)


def _comparison_sum(
    gap: np.ndarray,
    spec: GaussianArraySpec,
    rho: np.ndarray,
    u: np.ndarray,
    include_within: bool = True,
) -> float:
    # canonical flat-index order: within-row terms first, then cross-row terms
    flat_u = u[spec.row_index]
    total = 0.0
    with np.errstate(invalid="ignore", over="ignore"):
        if include_within:
            mask = within_row_mask(spec)
            decay = np.exp(-(flat_u[:, None] ** 2) / (1.0 + rho))
            total += float(np.sum(gap[mask] * decay[mask]))
        mask = cross_row_mask(spec)
        decay = np.exp(
            -(flat_u[:, None] ** 2 + flat_u[None, :] ** 2) / (2.0 * (1.0 + rho))
        )
        total += float(np.sum(gap[mask] * decay[mask]))
    return total


def theorem1_abs_bound(
    spec_x: GaussianArraySpec, spec_y: GaussianArraySpec, u: ThresholdVector
) -> BoundReport:
    """
    Upper bound on |Delta_(r)(u)| valid for every rank r and every u.

    :param spec_x: Array X with covariance sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array Y with covariance sigma^(0)
    :type spec_y: GaussianArraySpec
    :param u: Thresholds, one per row
    :type u: ThresholdVector
    :return: Bound report of kind thm1_abs
    :rtype: BoundReport
    """
    rho = pairwise_max_corr(spec_x, spec_y)
    values = _thresholds(spec_x, u)
    gap = np.abs(_arcsin_gap(spec_x, spec_y))
    value = _comparison_sum(gap, spec_x, rho, values) / (2.0 * np.pi)
    logger.debug(f"thm1_abs bound = {value:.6e}")
    return BoundReport(value=value, kind=BoundKind.THM1_ABS)


def theorem1_signed_bound(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    u: ThresholdVector,
    tol: float | None = None,
) -> BoundReport:
    """
    One-sided bound on Delta_(r)(u) when both arrays share their within-row
    covariances. The value is reported even when that condition fails.

    :param spec_x: Array X with covariance sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array Y with covariance sigma^(0)
    :type spec_y: GaussianArraySpec
    :param u: Thresholds, one per row
    :type u: ThresholdVector
    :param tol: Condition tolerance, defaults to CONDITION_TOLERANCE
    :type tol: float | None
    :return: Bound report of kind thm1_signed
    :rtype: BoundReport
    """
    rho = pairwise_max_corr(spec_x, spec_y)
    values = _thresholds(spec_x, u)
    gap = np.maximum(_arcsin_gap(spec_x, spec_y), 0.0)
    value = _comparison_sum(gap, spec_x, rho, values, include_within=False)
    violated = [] if s_ind_holds(spec_x, spec_y, tol) else [Condition.S_IND]
    return BoundReport(
        value=value / (2.0 * np.pi),
        kind=BoundKind.THM1_SIGNED,
        applicable=not violated,
        violated_conditions=violated,
    )


def remark_interval_bound(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    a: ThresholdVector,
    b: ThresholdVector,
) -> BoundReport:
    """
    Bound on |P{X_(r) in [a, b]} - P{Y_(r) in [a, b]}| with u_i = min(|a_i|, |b_i|).
    Infinite endpoints are allowed.

    :param spec_x: Array X with covariance sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array Y with covariance sigma^(0)
    :type spec_y: GaussianArraySpec
    :param a: Lower interval ends
    :type a: ThresholdVector
    :param b: Upper interval ends
    :type b: ThresholdVector
    :return: Bound report of kind remark_interval
    :rtype: BoundReport
    """
    lower, upper = _thresholds(spec_x, a), _thresholds(spec_x, b)
    if np.any(lower > upper):
        raise InputValidationError("interval with a_i > b_i")
    values = np.minimum(np.abs(lower), np.abs(upper))
    rho = pairwise_max_corr(spec_x, spec_y)
    gap = np.abs(_arcsin_gap(spec_x, spec_y))
    value = _comparison_sum(gap, spec_x, rho, values) / np.pi
    return BoundReport(value=value, kind=BoundKind.REMARK_INTERVAL)


def remark_large_u_bound(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    u: ThresholdVector,
    gate: float | None = None,
) -> BoundReport:
    """
    Signed bound with positive parts in both sums, valid for large thresholds.
    The gate min(u) >= LARGE_U_GATE is advisory only.
    """
    gate = app_settings.LARGE_U_GATE if gate is None else gate
    rho = pairwise_max_corr(spec_x, spec_y)
    values = _thresholds(spec_x, u)
    gap = np.maximum(_arcsin_gap(spec_x, spec_y), 0.0)
    value = _comparison_sum(gap, spec_x, rho, values) / (2.0 * np.pi)
    u_min = float(np.min(values))
    violated = [] if u_min >= gate else [Condition.LARGE_U_GATE]
    return BoundReport(
        value=value,
        kind=BoundKind.REMARK_LARGE_U,
        applicable=not violated,
        violated_conditions=violated,
        u_min=u_min,
    )


def a_integral(sigma0: float, sigma1: float, n: int, r: int) -> float:
    """
    Signed integral of (1 + |h|)^(2(n-r)) / (1 - h^2)^((n-r+1)/2) from sigma0 to
    sigma1.

    Evaluated in theta = arcsin(h), where the integrand becomes
    (1 + |sin theta|)^(2(n-r)) / cos(theta)^(n-r) and is bounded for n = r.

    :param sigma0: Lower limit in (-1, 1)
    :type sigma0: float
    :param sigma1: Upper limit in (-1, 1)
    :type sigma1: float
    :param n: Column count
    :type n: int
    :param r: Rank, 1 <= r <= n
    :type r: int
    :return: Integral value, negative when sigma1 < sigma0
    :rtype: float
    """
    if not (abs(sigma0) < 1.0 and abs(sigma1) < 1.0):
        raise InputValidationError(
            f"A-integral limits must lie in (-1, 1), got ({sigma0}, {sigma1})"
        )
    if not 1 <= r <= n:
        raise InputValidationError(f"rank r={r} outside 1..{n}")
    if sigma0 == sigma1:
        return 0.0

    power = n - r

    def integrand(theta: float) -> float:
        return (1.0 + abs(np.sin(theta))) ** (2 * power) / np.cos(theta) ** power

    lo, hi = sorted((float(np.arcsin(sigma0)), float(np.arcsin(sigma1))))
    # |sin| has a kink at 0
    points = [0.0] if lo < 0.0 < hi else None
    value, _ = integrate.quad(
        integrand,
        lo,
        hi,
        points=points,
        epsabs=A_INTEGRAL_TOL,
        epsrel=A_INTEGRAL_TOL,
        limit=200,
    )
    return value if sigma1 > sigma0 else -value


def theorem3_bounds(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    r: int,
    u: ThresholdVector,
    tol: float | None = None,
) -> tuple[BoundReport, BoundReport]:
    """
    Rank-dependent bounds under column independence, with u = min_i u_i.

    When column independence fails the bounds are still evaluated from
    sigma_il := sigma_{i1,l1} and flagged as inapplicable.

    :param spec_x: Array X with covariance sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array Y with covariance sigma^(0)
    :type spec_y: GaussianArraySpec
    :param r: Rank in the ascending convention
    :type r: int
    :param u: Strictly positive thresholds
    :type u: ThresholdVector
    :param tol: Condition tolerance, defaults to CONDITION_TOLERANCE
    :type tol: float | None
    :return: Signed and absolute bound reports
    :rtype: tuple[BoundReport, BoundReport]
    """
    check_same_shape(spec_x, spec_y)
    values = _thresholds(spec_x, u)
    if np.any(values <= 0.0):
        raise InputValidationError("theorem 3 bounds need strictly positive thresholds")
    n, d = spec_x.n, spec_x.d
    if not 1 <= r <= n:
        raise InputValidationError(f"rank r={r} outside 1..{n}")

    violated = []
    if not (column_independent(spec_x, tol) and column_independent(spec_y, tol)):
        violated.append(Condition.COLUMN_INDEPENDENCE)
        logger.warning("Column independence violated, using sigma_il = sigma_{i1,l1}")

    sigma1, sigma0 = spec_x.row_block(), spec_y.row_block()
    u_min = float(np.min(values))
    signed_sum, abs_sum = 0.0, 0.0
    for i in range(d):
        for l in range(i + 1, d):
            area = a_integral(sigma0[i, l], sigma1[i, l], n, r)
            rho = max(abs(sigma0[i, l]), abs(sigma1[i, l]))
            decay = np.exp(-(n - r + 1) * u_min**2 / (1.0 + rho))
            signed_sum += max(area, 0.0) * decay
            abs_sum += abs(area) * decay

    prefactor = (
        n
        * comb(n - 1, r - 1) ** 2
        / (2.0 * np.pi) ** (n - r + 1)
        * u_min ** (-2.0 * (n - r))
    )
    shared = dict(applicable=not violated, violated_conditions=violated, u_min=u_min)
    return (
        BoundReport(value=prefactor * signed_sum, kind=BoundKind.THM3_SIGNED, **shared),
        BoundReport(value=prefactor * abs_sum, kind=BoundKind.THM3_ABS, **shared),
    )


def prop2_log_ratio_bound(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    u: ThresholdVector,
    tol: float | None = None,
) -> BoundReport:
    """
    Logarithm of the upper bound on Theta_(r)(u) = P{X_(r) <= u} / P{Y_(r) <= u}.

    Working in log space keeps the bound finite where its exponential would
    overflow. The lower bound Theta >= 1 corresponds to a log of zero.

    :param spec_x: Array X with covariance sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array Y with covariance sigma^(0)
    :type spec_y: GaussianArraySpec
    :param u: Nonnegative thresholds
    :type u: ThresholdVector
    :param tol: Condition tolerance, defaults to CONDITION_TOLERANCE
    :type tol: float | None
    :return: Bound report of kind prop2_log_ratio
    :rtype: BoundReport
    """
    check_same_shape(spec_x, spec_y)
    tol = _tolerance(tol)
    values = _thresholds(spec_x, u)
    cross = cross_row_mask(spec_x)
    s1, s0 = spec_x.cov[cross], spec_y.cov[cross]
    if np.any(s1 >= 1.0) or np.any(s0 >= 1.0):
        raise InputValidationError(
            "cross-row correlation equal to 1 makes the ratio bound infinite"
        )

    violated = []
    if np.any(values < 0.0):
        violated.append(Condition.U_NONNEGATIVE)
    if not s_ind_holds(spec_x, spec_y, tol):
        violated.append(Condition.S_IND)
    if np.any(s0 < -tol) or np.any(s1 < s0 - tol):
        violated.append(Condition.SIGN_ORDER)

    log_ratio = np.log(
        (np.pi - 2.0 * np.arcsin(s0)) / (np.pi - 2.0 * np.arcsin(s1))
    )
    flat_u = values[spec_x.row_index]
    pair_sum = (flat_u[:, None] + flat_u[None, :])[cross]
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        weight = np.exp(-(pair_sum**2) / 8.0) / plus_mean(pair_sum / 2.0)
    weight = np.where(np.isfinite(pair_sum), weight, 0.0)
    value = float(np.sum(log_ratio * weight)) / SQRT_2PI
    if not violated:
        # tolerance-sized negative gaps
        value = max(value, 0.0)
    else:
        logger.info(
            f"Ratio bound conditions violated: {[c.value for c in violated]}"
        )
    return BoundReport(
        value=value,
        kind=BoundKind.PROP2_LOG_RATIO,
        applicable=not violated,
        violated_conditions=violated,
        u_min=float(np.min(values)),
    )


def slepian_conditions(
    spec_x: GaussianArraySpec, spec_y: GaussianArraySpec, tol: float | None = None
) -> tuple[bool, list[Condition]]:
    """
    Check the hypotheses under which Delta_(r)(u) <= 0 for every r and u.

    :param spec_x: Array X with covariance sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array Y with covariance sigma^(0)
    :type spec_y: GaussianArraySpec
    :param tol: Condition tolerance, defaults to CONDITION_TOLERANCE
    :type tol: float | None
    :return: Whether the ordering holds, and the violated conditions
    :rtype: tuple[bool, list[Condition]]
    """
    check_same_shape(spec_x, spec_y)
    violations = []
    if not s_ind_holds(spec_x, spec_y, tol):
        violations.append(Condition.S_IND)
    cross = cross_row_mask(spec_x)
    if np.any(spec_y.cov[cross] < spec_x.cov[cross] - _tolerance(tol)):
        violations.append(Condition.SLEPIAN_ORDER)
    return not violations, violations


def evaluate_bounds(
    spec_x: GaussianArraySpec,
    spec_y: GaussianArraySpec,
    r: int,
    u: ThresholdVector,
    tol: float | None = None,
) -> list[BoundReport]:
    """
    Every bound that can be evaluated at u, in a fixed order.

    :param spec_x: Array X with covariance sigma^(1)
    :type spec_x: GaussianArraySpec
    :param spec_y: Array Y with covariance sigma^(0)
    :type spec_y: GaussianArraySpec
    :param r: Rank in the ascending convention
    :type r: int
    :param u: Thresholds
    :type u: ThresholdVector
    :return: Bound reports
    :rtype: list[BoundReport]
    """
    check_same_shape(spec_x, spec_y)
    values = _thresholds(spec_x, u)
    lower = ThresholdVector(u=[float("-inf")] * spec_x.d)
    reports = [
        theorem1_abs_bound(spec_x, spec_y, u),
        theorem1_signed_bound(spec_x, spec_y, u, tol),
        remark_interval_bound(spec_x, spec_y, lower, u),
        remark_large_u_bound(spec_x, spec_y, u),
    ]
    if np.all(values > 0.0):
        reports.extend(theorem3_bounds(spec_x, spec_y, r, u, tol))
    else:
        logger.info("Skipping theorem 3 bounds: some threshold is not positive")
    try:
        reports.append(prop2_log_ratio_bound(spec_x, spec_y, u, tol))
    except InputValidationError as e:
        logger.warning(f"Skipping ratio bound: {e}")
    return reports
