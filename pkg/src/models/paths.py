from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, field_serializer
from pydantic import field_validator, model_validator

from core.exceptions import InputValidationError


class Spacing(str, Enum):
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"


class SamplingMethod(str, Enum):
    CHOLESKY = "cholesky"
    CIRCULANT = "circulant"


class ModelKind(str, Enum):
    FBM = "fbm"
    POWER_EXP = "power_exp"
    SELF_SIMILAR_BETA = "self_similar_beta"
    CUSTOM_TABLE = "custom_table"


class ModelParameterError(InputValidationError):
    """
    Raised when a correlation model parameter is outside its admissible range.
    """


class GridSpec(BaseModel):
    """
    Discrete time grid. Uniform grids hold t_k = t0 + k (t1 - t0) / (m - 1);
    exponential grids hold t_k = exp(s_k) for a uniform s-grid between ln t0
    and ln t1. A uniform grid may start below 0, as dual s-grids of times
    inside (0, 1) do.
    """

    t0: float
    t1: float
    m: int = Field(ge=2)
    spacing: Spacing = Spacing.UNIFORM

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_interval(self) -> "GridSpec":
        if not self.t1 > self.t0:
            raise InputValidationError(
                f"grid needs t1 > t0, got [{self.t0}, {self.t1}]"
            )
        if self.spacing == Spacing.EXPONENTIAL and self.t0 <= 0.0:
            raise InputValidationError("exponential grid needs t0 > 0")
        return self

    @property
    def points(self) -> np.ndarray:
        if self.spacing == Spacing.EXPONENTIAL:
            return np.exp(np.linspace(np.log(self.t0), np.log(self.t1), self.m))
        return np.linspace(self.t0, self.t1, self.m)

    @property
    def step(self) -> float:
        return (self.t1 - self.t0) / (self.m - 1)

    def refined(self, levels: int = 1) -> "GridSpec":
        """
        Nested refinement: every level halves the spacing, m -> 2m - 1.
        """
        return self.model_copy(update={"m": (self.m - 1) * 2**levels + 1})


class SampledPath(BaseModel):
    grid: GridSpec
    values: np.ndarray
    label: str = ""

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("values", mode="before")
    @classmethod
    def _as_float_array(cls, value) -> np.ndarray:
        return np.array(value, dtype=float)

    @model_validator(mode="after")
    def _check_values(self) -> "SampledPath":
        if self.values.shape != (self.grid.m,):
            raise InputValidationError(
                f"path has {self.values.shape} values for a grid of m={self.grid.m}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InputValidationError(f"path '{self.label}' has non-finite values")
        self.values.setflags(write=False)
        return self

    @field_serializer("values")
    def _serialize_values(self, values: np.ndarray) -> list[float]:
        return values.tolist()


class CorrelationModel(BaseModel):
    """
    Covariance model of a Gaussian process.

    fbm and self_similar_beta are self-similar with kernels K(s, t);
    power_exp and custom_table are stationary with correlation rho(t).
    """

    kind: ModelKind
    alpha: float | None = None
    scale: float = 1.0
    beta: float | None = None
    table_lags: list[float] | None = None
    table_rho: list[float] | None = None

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_parameters(self) -> "CorrelationModel":
        kind, alpha = self.kind, self.alpha
        if kind == ModelKind.FBM:
            if alpha is None or not 0.0 < alpha < 2.0:
                raise ModelParameterError(f"fbm needs alpha in (0, 2), got {alpha}")
        elif kind == ModelKind.POWER_EXP:
            if alpha is None or not 0.0 < alpha <= 2.0:
                raise ModelParameterError(
                    f"power_exp needs alpha in (0, 2], got {alpha}"
                )
            if not self.scale > 0.0:
                raise ModelParameterError(
                    f"power_exp needs scale > 0, got {self.scale}"
                )
        elif kind == ModelKind.SELF_SIMILAR_BETA:
            if self.beta is None or not self.beta > 0.0:
                raise ModelParameterError(
                    f"self_similar_beta needs beta > 0, got {self.beta}"
                )
            if alpha not in (None, 1.0):
                raise ModelParameterError(
                    "self_similar_beta has self-similarity index 1"
                )
        else:
            self._check_table()
        return self

    def _check_table(self) -> None:
        lags, rho = self.table_lags, self.table_rho
        if lags is None or rho is None or len(lags) != len(rho) or len(lags) < 2:
            raise ModelParameterError(
                "custom_table needs equal-length lags and rho, at least two"
            )
        if lags[0] != 0.0 or np.any(np.diff(lags) <= 0.0):
            raise ModelParameterError("custom_table lags must start at 0 and increase")
        if rho[0] != 1.0 or np.any(np.abs(rho) > 1.0):
            raise ModelParameterError("custom_table needs rho(0) = 1 and |rho| <= 1")
        if self.alpha is None or not 0.0 < self.alpha <= 2.0:
            raise ModelParameterError(
                f"custom_table needs a declared alpha in (0, 2], got {self.alpha}"
            )

    @property
    def index(self) -> float:
        """
        Local exponent alpha: rho(t) = 1 - |t|^alpha + o(|t|^alpha), or the
        self-similarity index 2H of a self-similar model.
        """
        return 1.0 if self.kind == ModelKind.SELF_SIMILAR_BETA else float(self.alpha)

    @property
    def self_similar(self) -> bool:
        return self.kind in (ModelKind.FBM, ModelKind.SELF_SIMILAR_BETA)

    @property
    def stationary(self) -> bool:
        return not self.self_similar

    def describe(self) -> str:
        if self.kind == ModelKind.SELF_SIMILAR_BETA:
            return f"self_similar_beta(beta={self.beta})"
        if self.kind == ModelKind.POWER_EXP:
            return f"power_exp(alpha={self.alpha}, scale={self.scale})"
        return f"{self.kind.value}(alpha={self.alpha})"
