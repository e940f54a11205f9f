from typing import Any, Dict, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class PointCloud(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray  # (count, n)

    @model_validator(mode="after")
    def _check_points(self):
        if self.points.ndim != 2 or self.points.shape[0] < 2:
            raise ValueError(f"need a (count >= 2, n) array, got shape {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point coordinates must be finite")
        return self

    @classmethod
    def from_array(cls, points) -> "PointCloud":
        return cls(points=np.asarray(points, dtype=float))

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


class LidEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0.0)
    method: Literal["box_counting", "two_radius", "knn_mle"]
    support: Dict[str, Any]  # counts, radii and fit details


class LidGap(BaseModel):
    model_config = ConfigDict(frozen=True)

    median_interior: float
    median_surface: float
    n_interior: int
    n_surface: int

    @property
    def gap(self) -> float:
        return self.median_surface - self.median_interior
