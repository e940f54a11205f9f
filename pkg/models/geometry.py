import math
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ShapeSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["ball", "box", "ellipsoid"]
    dim: int = Field(ge=1)
    radius: Optional[float] = None                 # ball only
    half_widths: Optional[Tuple[float, ...]] = None  # box only
    semi_axes: Optional[Tuple[float, ...]] = None    # ellipsoid only

    @model_validator(mode="after")
    def _check_parameters(self):
        if self.kind == "ball":
            if self.radius is None or self.half_widths is not None or self.semi_axes is not None:
                raise ValueError("ball takes exactly one parameter: radius")
            _positive_finite([self.radius], "radius")
        else:
            field = "half_widths" if self.kind == "box" else "semi_axes"
            other = "semi_axes" if self.kind == "box" else "half_widths"
            sizes = getattr(self, field)
            if sizes is None or getattr(self, other) is not None or self.radius is not None:
                raise ValueError(f"{self.kind} takes exactly one parameter: {field}")
            if len(sizes) != self.dim:
                raise ValueError(f"{field} has {len(sizes)} entries, dim is {self.dim}")
            _positive_finite(sizes, field)
        return self

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0) -> "ShapeSpec":
        return cls(kind="ball", dim=dim, radius=radius)

    @classmethod
    def box(cls, half_widths) -> "ShapeSpec":
        hw = tuple(float(h) for h in half_widths)
        return cls(kind="box", dim=len(hw), half_widths=hw)

    @classmethod
    def cube(cls, dim: int, half_width: float = 1.0) -> "ShapeSpec":
        return cls.box([half_width] * dim)

    @classmethod
    def ellipsoid(cls, semi_axes) -> "ShapeSpec":
        ax = tuple(float(a) for a in semi_axes)
        return cls(kind="ellipsoid", dim=len(ax), semi_axes=ax)

    def sizes(self) -> Tuple[float, ...]:
        """Per-axis extent: half-widths, semi-axes, or the radius repeated."""
        if self.kind == "ball":
            return (self.radius,) * self.dim
        return self.half_widths if self.kind == "box" else self.semi_axes

    def aspect(self) -> float:
        s = self.sizes()
        return max(s) / min(s)


def _positive_finite(values, name):
    for v in values:
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be finite and > 0, got {v}")


class ShellQuery(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(gt=0.0, le=1.0)          # relative perturbation bound
    beta: Optional[float] = Field(default=None, ge=0.0)  # absolute bound, intensity units


class DilationQuery(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(gt=0.0)
    mode: Literal["inverse_n", "proportional"] = "inverse_n"

    @field_validator("mode", mode="before")
    @classmethod
    def _dash_alias(cls, v):
        return v.replace("-", "_") if isinstance(v, str) else v


class DilationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    log_ratio: float
    ratio: float          # inf when saturated
    saturated: bool


class CountingState(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    log_u: float = 0.0   # ln of universe image count
    log_c: float = 0.0   # ln of class image count
    n: int = Field(default=1, ge=1)
    k: int = Field(default=256**3, ge=2)
    t: int = Field(default=256**3 - 1, ge=1)

    @model_validator(mode="after")
    def _check_counts(self):
        if self.t >= self.k:
            raise ValueError(f"t must be < k (t={self.t}, k={self.k})")
        if not (math.isfinite(self.log_u) and math.isfinite(self.log_c)):
            raise ValueError("log counts must be finite")
        if self.log_c > self.log_u:
            raise ValueError("class count cannot exceed universe count")
        return self

    @property
    def log_fraction(self) -> float:
        return self.log_c - self.log_u
