import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy import stats

import config
from core import geometry
from core.errors import DomainError, require
from core.parallel import chunk_plan, moments, moments_stderr, ordered_map, pairwise_merge, substream
from models.geometry import ShapeSpec
from models.sampling import Estimate, IsoperimetricComparison, Seed

logger = logging.getLogger("MonteCarlo")


def sample_uniform_batch(shape: ShapeSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` points uniform by volume inside `shape`, one per row."""
    n = shape.dim
    if shape.kind == "box":
        h = np.asarray(shape.half_widths)
        return rng.uniform(-1.0, 1.0, size=(count, n)) * h
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    # U^(1/n) through the log so large n does not underflow; 1 - U keeps U in (0, 1]
    r = np.exp(np.log1p(-rng.random(count)) / n)
    unit = g * r[:, None]
    if shape.kind == "ball":
        return unit * shape.radius
    return unit * np.asarray(shape.semi_axes)


def sample_uniform(shape: ShapeSpec, seed: Seed) -> np.ndarray:
    return sample_uniform_batch(shape, 1, substream(seed))[0]


def _estimate(shape: ShapeSpec, n_samples: int, seed: Seed,
              statistic: Callable[[np.ndarray], np.ndarray]) -> Estimate:
    require(n_samples >= config.MC_MIN_SAMPLES, f"n_samples must be >= {config.MC_MIN_SAMPLES}, got {n_samples}")
    plan = chunk_plan(n_samples, shape.dim)

    def run(job):
        index, (start, stop) = job
        rng = substream(seed, index)
        pts = sample_uniform_batch(shape, stop - start, rng)
        return moments(statistic(pts))

    merged = pairwise_merge(ordered_map(run, list(enumerate(plan))))
    return Estimate(mean=merged[1], stderr=moments_stderr(merged), n_samples=merged[0])


def _distances(shape: ShapeSpec, pts: np.ndarray) -> np.ndarray:
    d = geometry.distance_to_surface_batch(shape, pts)
    # uniform samples are interior up to rounding
    return np.nan_to_num(d, nan=0.0)


def estimate_shell_probability(shape: ShapeSpec, alpha: float, n_samples: int, seed: Seed) -> Estimate:
    require(0.0 < alpha <= 1.0, f"alpha must lie in (0, 1], got {alpha}")
    return estimate_shell_mass(shape, alpha * geometry.radius_of(shape), n_samples, seed)


def estimate_shell_mass(shape: ShapeSpec, beta: float, n_samples: int, seed: Seed) -> Estimate:
    """Fraction of the volume within absolute distance `beta` of the boundary."""
    require(beta >= 0.0, f"beta must be >= 0, got {beta}")
    return _estimate(shape, n_samples, seed,
                     lambda pts: (_distances(shape, pts) <= beta).astype(float))


def estimate_expected_surface_distance(shape: ShapeSpec, n_samples: int, seed: Seed) -> Estimate:
    return _estimate(shape, n_samples, seed, lambda pts: _distances(shape, pts))


def estimate_mean_norm(shape: ShapeSpec, n_samples: int, seed: Seed) -> Estimate:
    return _estimate(shape, n_samples, seed, lambda pts: np.linalg.norm(pts, axis=1))


def _estimate_gap(shape: ShapeSpec, ball: ShapeSpec, n_samples: int, seed: Seed,
                  statistic: Callable[[ShapeSpec, np.ndarray], np.ndarray]) -> Estimate:
    """statistic(ball) - statistic(shape) on coupled draws.

    Both shapes read the same substream per chunk, so ellipsoid and ball
    samples are the same unit-ball points scaled two ways.
    """
    require(n_samples >= config.MC_MIN_SAMPLES, f"n_samples must be >= {config.MC_MIN_SAMPLES}, got {n_samples}")
    plan = chunk_plan(n_samples, shape.dim)

    def run(job):
        index, (start, stop) = job
        a = sample_uniform_batch(shape, stop - start, substream(seed, index))
        b = sample_uniform_batch(ball, stop - start, substream(seed, index))
        return moments(statistic(ball, b) - statistic(shape, a))

    merged = pairwise_merge(ordered_map(run, list(enumerate(plan))))
    return Estimate(mean=merged[1], stderr=moments_stderr(merged), n_samples=merged[0])


def isoperimetric_compare(shape: ShapeSpec, n_samples: int, seed: Seed,
                          alpha: Optional[float] = None) -> IsoperimetricComparison:
    """Compare `shape` against the ball of equal volume, on matched seeds.

    `depth_gap` is E_ball - E_shape estimated on coupled draws; its stderr
    is the combined error of the comparison. With `alpha`, also estimates
    both shell masses at the shared absolute bound beta = alpha * R_ball,
    and `shell_gap` = shell_shape - shell_ball.
    """
    if shape.kind == "ball":
        raise DomainError("isoperimetric comparison needs a non-ball shape")
    ball = geometry.equal_volume_ball(shape)
    logger.info("comparing %s (n=%d, aspect %.3g) with ball R=%.6g",
                shape.kind, shape.dim, shape.aspect(), ball.radius)
    e_shape = estimate_expected_surface_distance(shape, n_samples, seed)
    e_ball = estimate_expected_surface_distance(ball, n_samples, seed)
    extra = dict(depth_gap=_estimate_gap(shape, ball, n_samples, seed, _distances))
    if alpha is not None:
        require(0.0 < alpha <= 1.0, f"alpha must lie in (0, 1], got {alpha}")
        beta = alpha * ball.radius
        extra.update(
            beta=beta,
            shell_shape=estimate_shell_mass(shape, beta, n_samples, seed),
            shell_ball=estimate_shell_mass(ball, beta, n_samples, seed),
            shell_gap=_estimate_gap(shape, ball, n_samples, seed,
                                    lambda s, pts: -(_distances(s, pts) <= beta).astype(float)),
        )
    return IsoperimetricComparison(
        E_shape=e_shape,
        E_ball=e_ball,
        ratio=e_shape.mean / e_ball.mean,
        ball_radius=ball.radius,
        **extra,
    )


def radial_uniformity_ks(n: int, n_samples: int, seed: Seed):
    """KS test of (|x|/R)^n against U(0, 1) for uniform ball samples."""
    shape = ShapeSpec.ball(n, 1.0)
    pts = sample_uniform_batch(shape, n_samples, substream(seed))
    u = np.exp(n * np.log(np.linalg.norm(pts, axis=1)))
    res = stats.kstest(u, "uniform")
    return float(res.statistic), float(res.pvalue)


def ks_critical_value(n_samples: int, level: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value."""
    return math.sqrt(-0.5 * math.log(level / 2.0)) / math.sqrt(n_samples)
