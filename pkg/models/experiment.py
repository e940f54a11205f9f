import hashlib
import json
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

import config


class Metric(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    value: Optional[float] = None
    predicted: Optional[float] = None
    tolerance: Optional[float] = None   # what `passed` was judged against
    passed: Optional[bool] = None       # None: reported, not checked
    index: Optional[int] = None         # position in a sweep


class Params(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# --- per-subcommand parameter blocks ------------------------------------------

class ShellProbParams(Params):
    n: int = Field(default=1000, ge=1)
    alpha: float = Field(default=0.01, gt=0.0, le=1.0)
    radius: float = Field(default=1.0, gt=0.0)
    samples: int = Field(default=config.MC_SAMPLES, ge=100)
    sigmas: float = Field(default=4.0, gt=0.0)


class SurfaceDistanceParams(Params):
    n: int = Field(default=3, ge=1)
    radius: float = Field(default=2.0, gt=0.0)
    samples: int = Field(default=config.MC_SAMPLES, ge=100)
    sigmas: float = Field(default=4.0, gt=0.0)


class IsoperimetricParams(Params):
    shape: Literal["box", "ellipsoid"] = "box"
    n: int = Field(default=10, ge=1)
    aspect: float = Field(default=1.5, ge=1.0)   # first axis / other axes
    axes: Optional[List[float]] = None           # explicit half-widths / semi-axes
    alpha: float = Field(default=0.1, gt=0.0, le=1.0)
    samples: int = Field(default=config.MC_SAMPLES, ge=100)
    sigmas: float = Field(default=3.0, gt=0.0)


class DilationParams(Params):
    alpha: float = Field(default=1.0, gt=0.0)
    mode: Literal["inverse_n", "proportional"] = "inverse_n"
    n_max: int = Field(default=10_000, ge=1)
    tolerance: float = Field(default=0.01, gt=0.0)


class CountingParams(Params):
    steps: int = Field(default=6, ge=1)
    n: int = Field(default=1, ge=1)
    k: int = Field(default=256**3, ge=2)
    t: int = Field(default=256**3 - 1, ge=1)


class SpectraFitParams(Params):
    m_min: int = Field(default=3, ge=1)
    m_max: int = Field(default=8, ge=1)
    samples: int = Field(default=config.SPECTRA_SAMPLES_PER_LEVEL, ge=30)
    l_LL: float = Field(default=1.0, ge=0.0)
    h_LH: float = Field(default=1.0, ge=0.0)
    h_HL: float = Field(default=1.0, ge=0.0)
    h_HH: float = Field(default=1.0, ge=0.0)
    distribution: Literal["gaussian", "laplace"] = config.SYNTHESIS_DISTRIBUTION
    slope_tolerance: float = Field(default=0.05, gt=0.0)
    energy_draws: int = Field(default=200, ge=2)
    energy_tolerance: float = Field(default=0.05, gt=0.0)


class LandscapeCensusParams(Params):
    n_vars: int = Field(default=1, ge=1, le=4)
    degree: int = Field(default=3, ge=2, le=6)
    trials: int = Field(default=200, ge=50)
    box: float = Field(default=config.SEARCH_HALF_WIDTH, gt=0.0)
    starts: Optional[int] = Field(default=None, ge=100)


class ReluApproxParams(Params):
    degrees: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])


class LidParams(Params):
    method: Literal["box", "two_radius", "knn", "surface_gap"] = "knn"
    m: int = Field(default=5, ge=1)
    ambient: int = Field(default=10, ge=1)
    points: int = Field(default=10_000, ge=100)
    k: int = Field(default=100, ge=10)
    queries: int = Field(default=200, ge=1)
    query_radius: float = Field(default=0.3, gt=0.0)
    levels: List[int] = Field(default_factory=lambda: [2, 3, 4, 5, 6])
    r1: float = Field(default=0.1, gt=0.0)
    r2: float = Field(default=0.2, gt=0.0)
    band: float = Field(default=0.05, gt=0.0, lt=0.5)
    tolerance: float = Field(default=0.15, gt=0.0)
    cloud: Optional[str] = None          # CSV point cloud, one point per row; m is its declared dimension
    save_cloud: bool = False


class AdvScalingParams(Params):
    mode: Literal["idealized", "trained"] = "idealized"
    n_values: List[int] = Field(default_factory=lambda: [64, 256, 1024, 4096])
    trials: int = Field(default=2000, ge=2)
    radius_law: Literal["sqrt_n", "constant", "kbit_box"] = "sqrt_n"
    radius_scale: float = Field(default=1.0, gt=0.0)
    negatives: Literal["shell", "box"] = "shell"
    shell_width: float = Field(default=1.0, gt=0.0)
    per_class: int = Field(default=400, ge=200)
    width: int = Field(default=config.MLP_WIDTH, ge=1)
    epochs: int = Field(default=config.SGD_EPOCHS, ge=0)
    lr: float = Field(default=config.SGD_LR, ge=0.0)
    batch: int = Field(default=config.SGD_BATCH, ge=1)
    tol: float = Field(default=config.SEARCH_TOL, ge=1e-6, le=1e-2)
    exponent_tolerance: Optional[float] = None   # default 0.02 idealized, 0.1 trained


class FakeAscentParams(Params):
    n: int = Field(default=16, ge=1)
    seeds: int = Field(default=10, ge=1)
    noise_scale: float = Field(default=1.0, gt=0.0)   # starts are uniform in [-scale, scale]^n
    step: float = Field(default=0.01, ge=0.0)
    max_iters: int = Field(default=10_000, ge=1)
    target: int = Field(default=1, ge=0, le=1)
    per_class: int = Field(default=400, ge=200)
    width: int = Field(default=config.MLP_WIDTH, ge=1)
    epochs: int = Field(default=config.SGD_EPOCHS, ge=0)
    required_fraction: float = Field(default=0.8, ge=0.0, le=1.0)


class ReportParams(Params):
    runs: List[str] = Field(default_factory=list)


# --- run bookkeeping --------------------------------------------------------

class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    subcommand: str
    seed: int = Field(default=0, ge=0, le=2**64 - 1)
    params: Dict[str, Any] = Field(default_factory=dict)
    output: str = config.OUTPUT_DIR

    def config_hash(self) -> str:
        """sha256 over the inputs; the output directory is not an input."""
        body = self.model_dump(mode="json", exclude={"output"})
        canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RunRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config_hash: str
    tool_version: str = config.__version__
    started_at: datetime
    finished_at: Optional[datetime] = None
    config: ExperimentConfig
    metrics: List[Metric] = Field(default_factory=list)
    passed: Optional[bool] = None
    exit_code: Optional[int] = None
    notes: List[str] = Field(default_factory=list)
    artifacts: List[str] = Field(default_factory=list)   # files written next to run.json
