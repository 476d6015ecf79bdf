from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, NonNegativeFloat, PositiveInt, model_validator

from models.mc_estimate import McEstimate

QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


class CurvePoint(BaseModel):
    """
    One point of a tail curve. x is the abscissa reported to the user (a level
    for lower-tail curves, a time for capture-time tails) and level the sup
    threshold actually tested. level_estimates holds the estimate on each
    nested grid, coarsest first; the last one equals estimate.value.
    """

    x: float
    level: float
    estimate: McEstimate
    censored: bool = False
    level_estimates: list[float] = []
    grid_delta: NonNegativeFloat = 0.0

    def table_row(self) -> dict:
        return {
            "x": self.x,
            "level": self.level,
            "p_hat": self.estimate.value,
            "stderr": self.estimate.stderr,
            "censored": self.censored,
            "grid_delta": self.grid_delta,
        }


class ExponentFit(BaseModel):
    slope: float
    intercept: float
    slope_stderr: NonNegativeFloat
    x_window: tuple[float, float]
    n_points: int = Field(ge=3)
    r2: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_window(self) -> "ExponentFit":
        if not self.x_window[0] < self.x_window[1]:
            raise ValueError(f"fit window {self.x_window} is empty")
        return self


class LadderPoint(BaseModel):
    """
    Finite-horizon functional -(1/T) ln P(sup over [0, T] <= level); estimate
    is None when no replication succeeded.
    """

    T: float
    successes: int = Field(ge=0)
    estimate: McEstimate | None = None

    @property
    def censored(self) -> bool:
        return self.estimate is None


class NormingConstants(BaseModel):
    a: float = Field(gt=0.0)
    b: float
    T: float = Field(gt=np.e)
    n: PositiveInt
    r: PositiveInt
    alpha: float = Field(gt=0.0, le=2.0)
    A_const: float = Field(gt=0.0)
    D: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _check_constants(self) -> "NormingConstants":
        if not np.isfinite(self.b):
            raise ValueError("norming constant b is not finite")
        if abs(self.a - np.sqrt(2.0 * self.r * np.log(self.T))) > 1e-12 * self.a:
            raise ValueError("a must equal sqrt(2 r ln T)")
        return self


class LimitTarget(str, Enum):
    GUMBEL = "gumbel"
    NORMAL = "normal"
    MIXED_GUMBEL = "mixed_gumbel"


class LimitCheckReport(BaseModel):
    """
    KS check of a standardized supremum against its limit law. level_ks holds
    the KS distance of the raw grid suprema on each nested grid, coarsest
    first. grid_shift is the extrapolated grid bias added to the finest-level
    suprema before ks_distance is computed.
    """

    target: LimitTarget
    ks_distance: float = Field(ge=0.0, le=1.0)
    ks_pvalue: float = Field(ge=0.0, le=1.0)
    n_replications: PositiveInt
    quantiles: dict[str, float]
    norming: NormingConstants
    gamma: float | None = None
    rho_t: float | None = None
    level_ks: list[float] = []
    grid_delta: NonNegativeFloat = 0.0
    grid_shift: NonNegativeFloat = 0.0
    advisories: list[str] = []
    diagnostics: dict[str, float] = {}

    def passes(self, gate: float) -> bool:
        return self.ks_distance <= gate


class SlepianVariant(str, Enum):
    # X_{r:n} + cZ against Y_{r:n} + cZ
    ORDER_STATS = "order_stats"
    # Z_{r:n} + cX against Z_{r:n} + cY
    PERTURBATION = "perturbation"


class SlepianProcessReport(BaseModel):
    variant: SlepianVariant
    p_x: McEstimate
    p_y: McEstimate
    ordered: bool

    @property
    def difference(self) -> float:
        return self.p_x.value - self.p_y.value
