"""Closed-form geometry of balls, boxes and ellipsoids.

Everything here is a pure function of immutable inputs. Probabilities of the
form 1 - (1 - a)^n are evaluated as -expm1(n * log1p(-a)) so tiny `a` and
huge `n` keep full precision; volumes and counts live in log space.
"""
import logging
import math
import numbers
from typing import Optional

import numpy as np
from scipy.special import gammaln

import config
from core.errors import DomainError, require
from models.geometry import CountingState, DilationQuery, DilationResult, ShapeSpec

logger = logging.getLogger("Geometry")

LOG_FLOAT_MAX = math.log(np.finfo(float).max)  # ~709.78


def _check_dim(n):
    require(isinstance(n, numbers.Integral) and not isinstance(n, bool) and n >= 1,
            f"dimension must be a positive integer, got {n!r}")


def shell_probability_closed_form(n: int, alpha: float) -> float:
    _check_dim(n)
    require(0.0 < alpha <= 1.0, f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return 1.0
    return -math.expm1(n * math.log1p(-alpha))


def expected_surface_distance_closed_form(n: int, R: float) -> float:
    _check_dim(n)
    require(R > 0 and math.isfinite(R), f"R must be finite and > 0, got {R}")
    return R / (n + 1)


def expected_relative_surface_distance(n: int) -> float:
    return expected_surface_distance_closed_form(n, 1.0)


def relative_shell_probability(n: int, beta: float, R: float) -> float:
    require(R > 0, f"R must be > 0, got {R}")
    require(beta > 0, f"beta must be > 0, got {beta}")
    require(beta <= R, f"beta={beta} exceeds R={R}; clamp before calling")
    return shell_probability_closed_form(n, beta / R)


def dilation_volume_ratio(n: int, query: DilationQuery) -> DilationResult:
    """Vol(B ⊕ B(0, r)) / Vol(B) for an n-ball, with r = αR/n or r = αR."""
    _check_dim(n)
    if query.mode == "inverse_n":
        log_ratio = n * math.log1p(query.alpha / n)
    else:
        log_ratio = n * math.log1p(query.alpha)
    saturated = log_ratio > LOG_FLOAT_MAX
    ratio = math.inf if saturated else math.exp(log_ratio)
    return DilationResult(n=n, log_ratio=log_ratio, ratio=ratio, saturated=saturated)


def radius_of(shape: ShapeSpec) -> float:
    """Half the maximum pairwise distance."""
    if shape.kind == "ball":
        return float(shape.radius)
    if shape.kind == "box":
        return float(np.linalg.norm(shape.half_widths))
    return float(max(shape.semi_axes))


def log_unit_ball_volume(n: int) -> float:
    return 0.5 * n * math.log(math.pi) - float(gammaln(0.5 * n + 1.0))


def log_volume(shape: ShapeSpec) -> float:
    if shape.kind == "ball":
        return log_unit_ball_volume(shape.dim) + shape.dim * math.log(shape.radius)
    if shape.kind == "box":
        return float(np.sum(np.log(2.0 * np.asarray(shape.half_widths))))
    return log_unit_ball_volume(shape.dim) + float(np.sum(np.log(shape.semi_axes)))


def equal_volume_ball(shape: ShapeSpec) -> ShapeSpec:
    n = shape.dim
    log_r = (log_volume(shape) - log_unit_ball_volume(n)) / n
    return ShapeSpec.ball(n, math.exp(log_r))


def isoperimetric_shell_bound(shape: ShapeSpec, alpha: float) -> float:
    """Lower bound on the shell probability of any body via its equal-volume ball.

    The body's shell of width alpha * R(M) holds at least as much mass as the
    ball's shell of the same absolute width.
    """
    require(0.0 < alpha <= 1.0, f"alpha must lie in (0, 1], got {alpha}")
    ball = equal_volume_ball(shape)
    alpha_b = min(1.0, alpha * radius_of(shape) / ball.radius)
    return shell_probability_closed_form(shape.dim, alpha_b)


def box_shell_probability_exact(shape: ShapeSpec, alpha: float) -> float:
    require(shape.kind == "box", "exact shell oracle is defined for boxes only")
    require(0.0 < alpha <= 1.0, f"alpha must lie in (0, 1], got {alpha}")
    h = np.asarray(shape.half_widths)
    s = alpha * radius_of(shape)
    log_inside = np.sum(np.log1p(-np.minimum(1.0, s / h)))
    return float(-np.expm1(log_inside))


def box_expected_surface_distance_exact(shape: ShapeSpec) -> float:
    # E[d] = ∫_0^{h_min} Π(1 - s/h_i) ds; the integrand is a degree-n polynomial,
    # so Gauss-Legendre with n//2 + 1 nodes is exact.
    require(shape.kind == "box", "exact distance oracle is defined for boxes only")
    h = np.asarray(shape.half_widths)
    h_min = float(h.min())
    t, w = np.polynomial.legendre.leggauss(shape.dim // 2 + 1)
    s = 0.5 * h_min * (t + 1.0)
    integrand = np.prod(1.0 - s[:, None] / h[None, :], axis=1)
    return float(0.5 * h_min * np.dot(w, integrand))


def kbit_cube(n: int, bits: int = 8) -> ShapeSpec:
    """Centred box of side 2^bits - 1: the finite pixel range at `bits` per pixel."""
    _check_dim(n)
    require(bits >= 1, f"bits must be >= 1, got {bits}")
    return ShapeSpec.cube(n, (2**bits - 1) / 2.0)


def membership(shape: ShapeSpec, points: np.ndarray) -> np.ndarray:
    """True for points inside or on the boundary."""
    return ~np.isnan(distance_to_surface_batch(shape, points))


def distance_to_surface(shape: ShapeSpec, point) -> Optional[float]:
    """Distance from an interior point to the boundary; None when outside."""
    x = np.asarray(point, dtype=float)
    require(x.shape == (shape.dim,), f"point has shape {x.shape}, expected ({shape.dim},)")
    d = distance_to_surface_batch(shape, x[None, :])[0]
    return None if np.isnan(d) else float(d)


def distance_to_surface_batch(shape: ShapeSpec, points: np.ndarray) -> np.ndarray:
    """Row-wise distance to the boundary, NaN for exterior rows.

    Points at most BOUNDARY_TOL outside count as on the boundary (distance 0).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != shape.dim:
        raise DomainError(f"points have shape {pts.shape}, expected (m, {shape.dim})")
    tol = config.BOUNDARY_TOL
    if shape.kind == "ball":
        d = shape.radius - np.linalg.norm(pts, axis=1)
    elif shape.kind == "box":
        d = np.min(np.asarray(shape.half_widths) - np.abs(pts), axis=1)
    else:
        return _ellipsoid_distance(np.asarray(shape.semi_axes), pts)
    out = np.where(d >= -tol, np.maximum(d, 0.0), np.nan)
    return out


def _ellipsoid_distance(a: np.ndarray, pts: np.ndarray) -> np.ndarray:
    a2 = a * a
    a_min = float(a.min())
    q = np.sum((pts / a) ** 2, axis=1)
    out = np.full(len(pts), np.nan)

    radial = np.sqrt(q)
    on_boundary = (radial >= 1.0) & ((radial - 1.0) * a_min <= config.BOUNDARY_TOL)
    out[on_boundary] = 0.0
    interior = radial < 1.0
    if not interior.any():
        return out

    x = pts[interior]
    sub = np.empty(len(x))
    min_axes = np.isclose(a, a_min, rtol=1e-12, atol=0.0)
    others = ~min_axes

    # With every min-axis coordinate at zero, F stays bounded as mu -> -a_min^2;
    # if it is still <= 0 there the nearest point sits on the min-axis rim.
    rim = np.all(x[:, min_axes] == 0.0, axis=1)
    gap = a2[others] - a_min * a_min
    xo = x[:, others]
    f_lim = np.sum((a[others] * xo / gap) ** 2, axis=1) - 1.0
    rim &= f_lim <= 0.0
    if rim.any():
        yo = xo[rim] * a2[others] / gap
        fill = a_min * a_min * (1.0 - np.sum((yo / a[others]) ** 2, axis=1))
        sub[rim] = np.sqrt(np.sum((yo - xo[rim]) ** 2, axis=1) + np.maximum(fill, 0.0))
    if (~rim).any():
        sub[~rim] = _kkt_newton(a, a2, x[~rim], -a_min * a_min)
    out[interior] = sub
    return out


def _kkt_newton(a, a2, x, lo_edge):
    """Safeguarded Newton on F(mu) = Σ (a_i x_i / (a_i^2 + mu))^2 - 1 over (-a_min^2, 0].

    F is convex and decreasing there; steps leaving the bracket fall back to
    bisection.
    """
    m = len(x)
    mu = np.zeros(m)
    lo = np.full(m, lo_edge)
    hi = np.zeros(m)
    c2 = (a * x) ** 2
    active = np.ones(m, dtype=bool)
    for _ in range(config.ELLIPSOID_MAX_ITER):
        if not active.any():
            break
        den = a2 + mu[active, None]
        F = np.sum(c2[active] / den**2, axis=1) - 1.0
        dF = -2.0 * np.sum(c2[active] / den**3, axis=1)
        idx = np.flatnonzero(active)
        pos = F > 0
        lo[idx[pos]] = mu[idx[pos]]
        hi[idx[~pos]] = mu[idx[~pos]]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dF != 0, mu[idx] - F / dF, np.nan)
        bad = ~np.isfinite(step) | (step <= lo[idx]) | (step >= hi[idx])
        step = np.where(bad, 0.5 * (lo[idx] + hi[idx]), step)
        done = (np.abs(step - mu[idx]) <= config.ELLIPSOID_TOL * (1.0 + np.abs(step))) | (np.abs(F) <= config.ELLIPSOID_TOL)
        mu[idx] = step
        active[idx[done]] = False
    if active.any():
        logger.warning("ellipsoid solve hit the iteration cap for %d points", int(active.sum()))
    # y - x = -x * mu / (a^2 + mu), written directly to avoid cancellation
    return np.linalg.norm(x * mu[:, None] / (a2 + mu[:, None]), axis=1)


def advance_counting(state: CountingState, steps: int = 1) -> CountingState:
    """Quadruple the pixel count `steps` times in log space."""
    require(isinstance(steps, numbers.Integral) and steps >= 1, f"steps must be a positive integer, got {steps}")
    require(state.t < state.k, f"t must be < k (t={state.t}, k={state.k})")
    log_k, log_t = math.log(state.k), math.log(state.t)
    log_u, log_c, n = state.log_u, state.log_c, state.n
    for _ in range(steps):
        log_u += n * log_k
        log_c += n * log_t
        n *= 4
    require(math.isfinite(log_u) and math.isfinite(log_c), "log counts overflowed float64")
    return state.model_copy(update={"log_u": log_u, "log_c": log_c, "n": n})
