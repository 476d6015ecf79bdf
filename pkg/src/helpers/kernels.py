import csv
from pathlib import Path

import numpy as np

from core.exceptions import InputValidationError
from core.logging_config import setup_logger
from models.paths import CorrelationModel, ModelKind, ModelParameterError

logger = setup_logger()

# spec string aliases, e.g. "beta:beta=0.5"
KIND_ALIASES = {
    "fbm": ModelKind.FBM,
    "power_exp": ModelKind.POWER_EXP,
    "powexp": ModelKind.POWER_EXP,
    "self_similar_beta": ModelKind.SELF_SIMILAR_BETA,
    "beta": ModelKind.SELF_SIMILAR_BETA,
    "custom_table": ModelKind.CUSTOM_TABLE,
    "table": ModelKind.CUSTOM_TABLE,
}


def fbm_cov(s, t, alpha: float):
    """
    Fractional Brownian motion covariance (s^alpha + t^alpha - |t - s|^alpha) / 2.

    :param s: Time(s) >= 0
    :param t: Time(s) >= 0
    :param alpha: Twice the Hurst index, in (0, 2)
    :type alpha: float
    :return: Covariance, broadcast over s and t
    """
    if not 0.0 < alpha < 2.0:
        raise ModelParameterError(f"fbm needs alpha in (0, 2), got {alpha}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0.0) or np.any(t < 0.0):
        raise InputValidationError("fbm_cov needs s, t >= 0")
    value = 0.5 * (s**alpha + t**alpha - np.abs(t - s) ** alpha)
    return float(value) if value.ndim == 0 else value


def beta_kernel(s, t, beta: float):
    """
    2^beta (s t)^((1 + beta) / 2) / (s + t)^beta, zero when s = t = 0.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    total = s + t
    with np.errstate(divide="ignore", invalid="ignore"):
        value = 2.0**beta * (s * t) ** ((1.0 + beta) / 2.0) / total**beta
    return np.where(total > 0.0, value, 0.0)


def stationary_corr(model: CorrelationModel, lags) -> np.ndarray:
    lags = np.abs(np.asarray(lags, dtype=float))
    if model.kind == ModelKind.POWER_EXP:
        return np.exp(-((lags / model.scale) ** model.alpha))
    if model.kind == ModelKind.CUSTOM_TABLE:
        # beyond the table the last tabulated value is held
        return np.interp(lags, model.table_lags, model.table_rho)
    raise InputValidationError(f"{model.kind.value} is not a stationary model")


def self_similar_kernel(model: CorrelationModel, s, t) -> np.ndarray:
    if model.kind == ModelKind.FBM:
        return np.asarray(fbm_cov(s, t, model.alpha))
    if model.kind == ModelKind.SELF_SIMILAR_BETA:
        return beta_kernel(s, t, model.beta)
    raise InputValidationError(f"{model.kind.value} is not a self-similar model")


def gram_matrix(model: CorrelationModel, points: np.ndarray) -> np.ndarray:
    """
    Covariance matrix of the process at the given time points.

    :param model: Correlation model
    :type model: CorrelationModel
    :param points: Time points
    :type points: np.ndarray
    :return: len(points) x len(points) matrix
    :rtype: np.ndarray
    """
    points = np.asarray(points, dtype=float)
    if model.self_similar:
        return self_similar_kernel(model, points[:, None], points[None, :])
    return stationary_corr(model, points[:, None] - points[None, :])


def load_table_csv(path: Path) -> tuple[list[float], list[float]]:
    """
    Read (lag, rho) pairs from a two-column CSV, header optional.
    """
    path = Path(path)
    if not path.exists():
        raise InputValidationError(f"correlation table not found: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row]
    lags, rho = [], []
    for number, row in enumerate(rows):
        try:
            lag, value = float(row[0]), float(row[1])
        except (ValueError, IndexError) as e:
            if number == 0:
                continue
            raise InputValidationError(f"{path}: bad row {number + 1}: {row}") from e
        lags.append(lag)
        rho.append(value)
    logger.debug(f"Loaded {len(lags)} correlation table rows from {path}")
    return lags, rho


def parse_model_spec(text: str) -> CorrelationModel:
    """
    Parse a model SPEC string "kind:key=value,key=value".

    Examples: "fbm:alpha=1", "power_exp:alpha=1,scale=2", "beta:beta=0.5",
    "table:file=corr.csv,alpha=1".

    :param text: Model specification
    :type text: str
    :return: Validated model
    :rtype: CorrelationModel
    """
    head, _, tail = text.strip().partition(":")
    kind = KIND_ALIASES.get(head.strip().lower())
    if kind is None:
        raise InputValidationError(
            f"unknown model kind '{head}', expected one of {sorted(KIND_ALIASES)}"
        )
    params: dict = {}
    for item in filter(None, (part.strip() for part in tail.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise InputValidationError(f"model parameter '{item}' is not key=value")
        params[key.strip()] = value.strip()

    allowed = {"alpha", "scale", "beta", "file"}
    unknown = set(params) - allowed
    if unknown:
        raise InputValidationError(f"unknown model parameter(s): {sorted(unknown)}")
    fields: dict = {"kind": kind}
    try:
        for key in ("alpha", "scale", "beta"):
            if key in params:
                fields[key] = float(params[key])
    except ValueError as e:
        raise InputValidationError(f"non-numeric model parameter in '{text}'") from e
    if "file" in params:
        fields["table_lags"], fields["table_rho"] = load_table_csv(params["file"])
    return CorrelationModel(**fields)
