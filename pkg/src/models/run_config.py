from enum import Enum
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, NonNegativeFloat, PositiveInt, SerializeAsAny
from pydantic import field_validator, model_validator

from core.config import app_settings
from core.exceptions import InputValidationError
from models.gaussian_array import Convention
from models.paths import SamplingMethod

DEFAULT_X_GRID = "geom:1.0:0.05:0.8"
DEFAULT_S_GRID = "geom:1:1000:2"
DEFAULT_T_LADDER = "lin:2:10:5"
DEFAULT_LIMIT_MODEL = "power_exp:alpha=1"


class Subcommand(str, Enum):
    BOUNDS = "bounds"
    VERIFY = "verify"
    LOWTAIL = "lowtail"
    PURSUIT = "pursuit"
    LISHAO = "lishao"
    SLEPIAN = "slepian"
    GUMBEL = "gumbel"
    CONSTANTS = "constants"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class GumbelVariant(str, Enum):
    # a: weak dependence, b: strong (normal limit), c: mixed Gumbel
    A = "a"
    B = "b"
    C = "c"


def parse_grid_spec(text: str) -> list[float]:
    """
    Expand a grid SPEC string into its values.

    Forms: "geom:start:stop:ratio" (start, start*ratio, ... while not past
    stop), "lin:start:stop:count", "log:start:stop:count" or a comma list.

    :param text: Grid specification
    :type text: str
    :return: Grid values
    :rtype: list[float]
    """
    text = text.strip()
    kind, _, rest = text.partition(":")
    try:
        if kind in ("geom", "lin", "log"):
            start, stop, third = (float(part) for part in rest.split(":"))
            if kind == "lin":
                return np.linspace(start, stop, int(third)).tolist()
            if kind == "log":
                return np.geomspace(start, stop, int(third)).tolist()
            if not third > 0.0 or third == 1.0 or start <= 0.0 or stop <= 0.0:
                raise InputValidationError(f"bad geometric grid '{text}'")
            count = int(np.floor(np.log(stop / start) / np.log(third) + 1e-9)) + 1
            return (start * third ** np.arange(max(count, 1))).tolist()
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InputValidationError(f"malformed grid specification '{text}'") from e


def _grid_values(value):
    if isinstance(value, str):
        return parse_grid_spec(value)
    return value


def _window_values(value):
    if isinstance(value, str):
        value = parse_grid_spec(value)
    if value is not None and len(value) != 2:
        raise InputValidationError(f"fit window needs two values, got {value}")
    return value


class CommandParams(BaseModel):
    class Config:
        extra = "forbid"


class BoundsParams(CommandParams):
    cov_x: Path
    cov_y: Path
    r: PositiveInt
    u: list[float]
    convention: Convention = Convention.ASCENDING
    tolerance: NonNegativeFloat | None = None

    parse_u = field_validator("u", mode="before")(_grid_values)


class VerifyParams(BoundsParams):
    samples: int = Field(100_000, ge=100)
    crn: bool = False
    antithetic: bool | None = None


class LowtailParams(CommandParams):
    alpha: float = Field(gt=0.0, lt=2.0)
    n: PositiveInt
    r: PositiveInt
    c: NonNegativeFloat = 0.0
    x_grid: list[float] = Field(default_factory=lambda: parse_grid_spec(DEFAULT_X_GRID))
    paths: PositiveInt = 10_000
    grid_m: int = Field(default_factory=lambda: 2**app_settings.GRID_EXPONENT + 1, ge=2)
    model: str | None = None
    convention: Convention = Convention.DESCENDING
    refinement: int = Field(1, ge=0)
    method: SamplingMethod | None = None
    window: tuple[float, float] | None = None
    dump_paths: Path | None = None

    parse_x_grid = field_validator("x_grid", mode="before")(_grid_values)
    parse_window = field_validator("window", mode="before")(_window_values)


class PursuitParams(CommandParams):
    alpha: float = Field(gt=0.0, lt=2.0)
    n: PositiveInt
    r: PositiveInt
    s_grid: list[float] = Field(default_factory=lambda: parse_grid_spec(DEFAULT_S_GRID))
    paths: PositiveInt = 10_000
    grid_m: int = Field(default_factory=lambda: 2**app_settings.GRID_EXPONENT + 1, ge=2)
    model: str | None = None
    convention: Convention = Convention.DESCENDING
    refinement: int = Field(1, ge=0)
    method: SamplingMethod | None = None
    window: tuple[float, float] | None = None

    parse_s_grid = field_validator("s_grid", mode="before")(_grid_values)
    parse_window = field_validator("window", mode="before")(_window_values)


class LishaoParams(CommandParams):
    alpha: float = Field(gt=0.0, lt=2.0)
    n: PositiveInt
    r: PositiveInt
    c: NonNegativeFloat = 0.0
    t_ladder: list[float] = Field(
        default_factory=lambda: parse_grid_spec(DEFAULT_T_LADDER)
    )
    paths: PositiveInt = 10_000
    steps_per_unit: PositiveInt = 32
    level: float = 0.0
    model: str | None = None
    convention: Convention = Convention.DESCENDING
    method: SamplingMethod | None = None

    parse_t_ladder = field_validator("t_ladder", mode="before")(_grid_values)


class SlepianParams(CommandParams):
    model_x: str
    model_y: str
    model_z: str
    c: float = 0.0
    level: float
    n: PositiveInt = 1
    r: PositiveInt = 1
    convention: Convention = Convention.DESCENDING
    paths: PositiveInt = 10_000
    grid_m: int = Field(65, ge=2)
    t0: NonNegativeFloat = 0.0
    t1: float = 1.0
    both_variants: bool = False
    method: SamplingMethod = SamplingMethod.CHOLESKY


class GumbelParams(CommandParams):
    variant: GumbelVariant = GumbelVariant.A
    gamma: float | None = Field(None, gt=0.0)
    rho_t: float | None = Field(None, gt=0.0, lt=1.0)
    n: PositiveInt = 1
    r: PositiveInt = 1
    t: float = Field(100.0, gt=np.e)
    reps: int = Field(2000, ge=2)
    a_const: float = Field(1.0, gt=0.0)
    model: str = DEFAULT_LIMIT_MODEL
    grid_m: int | None = Field(None, ge=2)
    refinement: int | None = Field(None, ge=0)
    method: SamplingMethod | None = None

    @model_validator(mode="after")
    def _check_variant(self) -> "GumbelParams":
        if self.variant == GumbelVariant.B and self.rho_t is None:
            raise ValueError("variant b needs rho_t")
        if self.variant == GumbelVariant.C and self.gamma is None:
            raise ValueError("variant c needs gamma")
        if self.r > self.n:
            raise ValueError(f"rank r={self.r} outside 1..{self.n}")
        return self


class ConstantsParams(CommandParams):
    n: PositiveInt
    r: PositiveInt
    alpha: float = Field(gt=0.0, le=2.0)
    t: float = Field(gt=np.e)
    a_const: float | None = Field(None, gt=0.0)
    calibrate: bool = False
    model: str = DEFAULT_LIMIT_MODEL
    reps: int = Field(2000, ge=2)
    u: float = 3.0
    grid_m: int | None = Field(None, ge=2)
    refinement: int | None = Field(None, ge=0)

    @model_validator(mode="after")
    def _check_constant(self) -> "ConstantsParams":
        if self.a_const is None and not self.calibrate:
            raise ValueError("supply a_const or request calibration")
        if self.r > self.n:
            raise ValueError(f"rank r={self.r} outside 1..{self.n}")
        return self


PARAMS_MODELS: dict[Subcommand, type[CommandParams]] = {
    Subcommand.BOUNDS: BoundsParams,
    Subcommand.VERIFY: VerifyParams,
    Subcommand.LOWTAIL: LowtailParams,
    Subcommand.PURSUIT: PursuitParams,
    Subcommand.LISHAO: LishaoParams,
    Subcommand.SLEPIAN: SlepianParams,
    Subcommand.GUMBEL: GumbelParams,
    Subcommand.CONSTANTS: ConstantsParams,
}


class OutputSpec(BaseModel):
    out: Path | None = None
    format: OutputFormat = OutputFormat.JSON

    class Config:
        extra = "forbid"


class RunConfig(BaseModel):
    """
    Fully resolved run: the scientific record embedded in every report.
    The worker count is an execution detail and is left out of dumps.
    """

    subcommand: Subcommand
    params: SerializeAsAny[CommandParams]
    seed: int = Field(ge=0, lt=2**64)
    workers: PositiveInt = Field(1, exclude=True)
    chunk_size: PositiveInt = Field(default_factory=lambda: app_settings.CHUNK_SIZE)
    output: OutputSpec = OutputSpec()
    timestamp: bool = True

    class Config:
        extra = "forbid"
