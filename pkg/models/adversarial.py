from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.geometry import ShapeSpec


class LinearModel(BaseModel):
    """Binary decision sign(w.x + b); class 1 on the positive side."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["linear"] = "linear"
    w: np.ndarray
    b: float = 0.0

    @model_validator(mode="after")
    def _check_weights(self):
        if self.w.ndim != 1 or not np.all(np.isfinite(self.w)) or not np.any(self.w != 0):
            raise ValueError("w must be a finite nonzero vector")
        return self

    @classmethod
    def of(cls, w, b: float = 0.0) -> "LinearModel":
        return cls(w=np.asarray(w, dtype=float), b=float(b))

    @property
    def n(self) -> int:
        return self.w.shape[0]


class MlpModel(BaseModel):
    """One hidden ReLU layer, one logit per class (two classes)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["mlp"] = "mlp"
    W1: np.ndarray  # (h, n)
    b1: np.ndarray  # (h,)
    W2: np.ndarray  # (2, h)
    b2: np.ndarray  # (2,)

    @model_validator(mode="after")
    def _check_shapes(self):
        h, n = self.W1.shape
        if self.b1.shape != (h,) or self.W2.shape != (2, h) or self.b2.shape != (2,):
            raise ValueError("inconsistent layer shapes")
        for arr in (self.W1, self.b1, self.W2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise ValueError("weights must be finite")
        return self

    @property
    def n(self) -> int:
        return self.W1.shape[1]

    @property
    def width(self) -> int:
        return self.W1.shape[0]

    @classmethod
    def from_linear(cls, model: LinearModel) -> "MlpModel":
        """Two ReLU units carrying +-(w.x + b): logit_1 - logit_0 = w.x + b everywhere."""
        w = model.w
        return cls(
            W1=np.stack([w, -w]),
            b1=np.array([model.b, -model.b]),
            W2=np.array([[0.0, 0.0], [1.0, -1.0]]),
            b2=np.zeros(2),
        )


Model = Union[LinearModel, MlpModel]


class PerturbationResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p: np.ndarray
    norm: float = Field(ge=0.0)   # ||p|| in norm_order
    norm_order: float = 2.0
    flipped: bool
    evaluations: int = 0
    borderline: bool = False


class SgdConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lr: float = Field(default=0.05, ge=0.0)
    epochs: int = Field(default=200, ge=0)
    batch: int = Field(default=32, ge=1)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)


class SystemSpec(BaseModel):
    """A synthetic two-class system at resolution n.

    Positives fill a ball (or k-bit box); negatives fill the thin halo
    between it and its dilation by a factor 1 + shell_width / n ("shell"),
    or the rest of the enclosing cube ("box").
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(ge=1)
    model: Literal["linear", "mlp", "idealized"] = "mlp"
    width: int = Field(default=64, ge=1)
    radius_law: Literal["sqrt_n", "constant", "kbit_box"] = "sqrt_n"
    radius_scale: float = Field(default=1.0, gt=0.0)
    bits: int = Field(default=8, ge=1)
    negatives: Literal["shell", "box"] = "shell"
    shell_width: float = Field(default=1.0, gt=0.0)
    per_class: int = Field(default=400, ge=1)
    validation_fraction: float = Field(default=0.25, gt=0.0, lt=1.0)


class Dataset(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    positive_shape: ShapeSpec


class TrainedSystem(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: SystemSpec
    model: Model
    data: Dataset
    initial_accuracy: float
    train_accuracy: float
    val_accuracy: float
    final_loss: float


class ScalingRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    mean_norm: Optional[float] = None
    norm_stderr: Optional[float] = None
    count: int = 0
    val_accuracy: Optional[float] = None
    empirical_radius: Optional[float] = None
    shape_radius: float
    aborted: Optional[str] = None


class ScalingReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["idealized", "trained"]
    radius_law: str
    rows: List[ScalingRow]
    exponent: Optional[float] = None
    exponent_stderr: Optional[float] = None
    predicted_exponent: float


class AscentResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    image: np.ndarray
    confidence_trace: List[float]
    iterations: int
    reached: bool
