from pydantic import BaseModel, ConfigDict, Field, model_validator

U64 = 2**64 - 1


class Seed(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: int = Field(ge=0, le=U64)
    stream_id: int = Field(default=0, ge=0, le=U64)  # parallel substream selector

    def child(self, stream_id: int) -> "Seed":
        return Seed(value=self.value, stream_id=stream_id)


class Estimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    stderr: float = Field(ge=0.0)       # sample sd (ddof=1) / sqrt(n_samples)
    n_samples: int = Field(ge=2)

    def within(self, target: float, sigmas: float) -> bool:
        return abs(self.mean - target) <= sigmas * self.stderr


class IsoperimetricComparison(BaseModel):
    model_config = ConfigDict(frozen=True)

    E_shape: Estimate
    E_ball: Estimate
    ratio: float
    ball_radius: float
    depth_gap: Estimate                   # E_ball - E_shape, coupled draws
    shell_shape: Estimate | None = None   # at the shared absolute bound beta
    shell_ball: Estimate | None = None
    shell_gap: Estimate | None = None     # shell_shape - shell_ball, coupled draws
    beta: float | None = None

    @model_validator(mode="after")
    def _paired_shells(self):
        if not (self.shell_shape is None) == (self.shell_ball is None) == (self.shell_gap is None):
            raise ValueError("shell estimates come in pairs")
        return self
