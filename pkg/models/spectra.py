from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class SubbandPowers(BaseModel):
    """Energy per pixel contributed by each band at the base (coarsest) octave."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    l_LL: float = Field(default=1.0, ge=0.0)
    h_LH: float = Field(default=0.0, ge=0.0)
    h_HL: float = Field(default=0.0, ge=0.0)
    h_HH: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _not_silent(self):
        if max(self.l_LL, self.h_LH, self.h_HL, self.h_HH) <= 0.0:
            raise ValueError("at least one subband power must be > 0")
        return self

    def at_octave(self, k: int) -> Tuple[float, float, float]:
        """(LH, HL, HH) powers k octaves above the base: 1/f for LH and HL, 1/f^2 for HH."""
        return self.h_LH / 2**k, self.h_HL / 2**k, self.h_HH / 4**k


def _is_pow2(v: int) -> bool:
    return v >= 1 and (v & (v - 1)) == 0


class ImageGrid(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    side: int
    values: np.ndarray

    @model_validator(mode="after")
    def _check_grid(self):
        if not _is_pow2(self.side):
            raise ValueError(f"side must be a power of two, got {self.side}")
        if self.values.shape != (self.side, self.side):
            raise ValueError(f"values have shape {self.values.shape}, expected ({self.side}, {self.side})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image values must be finite")
        return self

    @classmethod
    def from_array(cls, values) -> "ImageGrid":
        arr = np.asarray(values, dtype=float)
        return cls(side=arr.shape[0], values=arr)

    @property
    def levels(self) -> int:
        return self.side.bit_length() - 1

    def energy(self) -> float:
        return float(np.sum(self.values**2))


class WaveletPyramid(BaseModel):
    """Orthonormal Haar pyramid. details[0] is the finest level."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    side: int
    details: List[Tuple[np.ndarray, np.ndarray, np.ndarray]]  # (LH, HL, HH) per level
    low: np.ndarray

    @model_validator(mode="after")
    def _check_counts(self):
        total = self.low.size + sum(b.size for level in self.details for b in level)
        if total != self.side * self.side:
            raise ValueError(f"pyramid holds {total} coefficients for {self.side**2} pixels")
        return self

    @property
    def levels(self) -> int:
        return len(self.details)

    def energy(self) -> float:
        return float(np.sum(self.low**2) + sum(np.sum(b**2) for level in self.details for b in level))


class RadiusFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    slope: float
    intercept: float
    slope_stderr: float
    levels: List[int]
    mean_norms: List[float]
    distribution: Literal["gaussian", "laplace"] = "gaussian"
