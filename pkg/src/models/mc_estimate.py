from pydantic import BaseModel, Field, NonNegativeFloat, PositiveInt


class McEstimate(BaseModel):
    value: float
    stderr: NonNegativeFloat
    n_samples: PositiveInt
    seed: int = Field(ge=0, lt=2**64)
    diagnostics: dict[str, float] = {}

    def within(self, target: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - target) <= k * self.stderr + slack
