from enum import Enum

from pydantic import BaseModel, model_validator


class BoundKind(str, Enum):
    THM1_ABS = "thm1_abs"
    THM1_SIGNED = "thm1_signed"
    REMARK_INTERVAL = "remark_interval"
    REMARK_LARGE_U = "remark_large_u"
    THM3_SIGNED = "thm3_signed"
    THM3_ABS = "thm3_abs"
    PROP2_LOG_RATIO = "prop2_log_ratio"


NONNEGATIVE_KINDS = {BoundKind.THM1_ABS, BoundKind.THM3_ABS, BoundKind.PROP2_LOG_RATIO}
# bounds on |Delta| or on a log ratio; the rest bound Delta from above
ABSOLUTE_KINDS = {BoundKind.THM1_ABS, BoundKind.THM3_ABS, BoundKind.REMARK_INTERVAL}


class Condition(str, Enum):
    S_IND = "cond_s_ind"
    COLUMN_INDEPENDENCE = "column_independence"
    SIGN_ORDER = "sign_order"
    SLEPIAN_ORDER = "slepian_order"
    U_NONNEGATIVE = "u_nonnegative"
    LARGE_U_GATE = "large_u_gate"


class BoundReport(BaseModel):
    value: float
    kind: BoundKind
    applicable: bool = True
    violated_conditions: list[Condition] = []
    u_min: float | None = None

    @model_validator(mode="after")
    def _check_consistency(self) -> "BoundReport":
        if not self.applicable and not self.violated_conditions:
            raise ValueError("inapplicable bound must name a violated condition")
        if self.kind in NONNEGATIVE_KINDS and self.applicable and self.value < 0.0:
            raise ValueError(f"{self.kind.value} bound must be nonnegative")
        return self

    def table_row(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "applicable": self.applicable,
            "violated_conditions": ";".join(c.value for c in self.violated_conditions),
            "u_min": self.u_min,
        }
