"""Minimal perturbations, the resolution-scaling experiment and fake-example ascent."""
import logging
import math
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist

import config
from core import geometry, networks
from core.errors import CertificateError, DomainError, NoAscentDirection, NoFlipWithinBudget, require
from core.montecarlo import sample_uniform_batch
from core.parallel import ordered_map, substream
from models.adversarial import (AscentResult, LinearModel, MlpModel, Model, PerturbationResult,
                                ScalingReport, ScalingRow, SgdConfig, SystemSpec, TrainedSystem)
from models.geometry import ShapeSpec
from models.sampling import Seed

logger = logging.getLogger("Adversarial")


# --- linear models ----------------------------------------------------------

def _fdot(a, b) -> float:
    # exact-sum dot product: zero padding never changes the result
    return math.fsum(float(u) * float(v) for u, v in zip(a, b))


def _lp(v, order: float) -> float:
    if order == 1:
        return math.fsum(abs(float(t)) for t in v)
    if order == 2:
        return math.sqrt(math.fsum(float(t) * float(t) for t in v))
    return max((abs(float(t)) for t in v), default=0.0)


def _linear_class(model: LinearModel, x) -> int:
    return 1 if _fdot(model.w, x) + model.b > 0.0 else 0


def min_perturbation_linear(model: LinearModel, x, norm_order: float = 2) -> PerturbationResult:
    """Closest flip across the hyperplane w.x + b = 0.

    `norm` is the exact distance |w.x + b| / ||w||_q with q dual to
    `norm_order`. Only the returned step `p` is stretched by 1 + OVERSHOOT
    (escalated if rounding keeps x + p on the original side).
    """
    require(norm_order in (1, 2, math.inf), f"norm_order must be 1, 2 or inf, got {norm_order}")
    x = np.asarray(x, dtype=float)
    require(x.shape == model.w.shape, f"x has shape {x.shape}, expected {model.w.shape}")
    f = _fdot(model.w, x) + model.b
    if f == 0.0:
        return PerturbationResult(p=np.zeros_like(x), norm=0.0, norm_order=norm_order,
                                  flipped=False, evaluations=1, borderline=True)
    w = model.w
    distance = hyperplane_distance(model, x, norm_order)
    if norm_order == 2:
        direction = w / math.fsum(float(t) * float(t) for t in w)
    elif norm_order == 1:
        j = int(np.argmax(np.abs(w)))
        direction = np.zeros_like(w)
        direction[j] = 1.0 / w[j]
    else:
        direction = np.sign(w) / _lp(w, 1)

    origin = _linear_class(model, x)
    overshoot = config.OVERSHOOT
    evaluations = 1
    for _ in range(12):
        p = -f * (1.0 + overshoot) * direction
        evaluations += 1
        if _linear_class(model, x + p) != origin:
            return PerturbationResult(p=p, norm=distance, norm_order=norm_order,
                                      flipped=True, evaluations=evaluations)
        overshoot *= 10.0
    logger.warning("no sign change after overshoot %.1e; distance %.6g", overshoot, distance)
    return PerturbationResult(p=p, norm=distance, norm_order=norm_order,
                              flipped=False, evaluations=evaluations, borderline=True)


def hyperplane_distance(model: LinearModel, x, norm_order: float = 2) -> float:
    dual = {1: math.inf, 2: 2, math.inf: 1}[norm_order]
    return abs(_fdot(model.w, x) + model.b) / _lp(model.w, dual)


def linf_budget_required(model: LinearModel, x) -> float:
    """Smallest L-inf budget that flips x; grows with the margin, not with n."""
    return hyperplane_distance(model, x, math.inf)


def sign_step_margin_change(model: LinearModel, eps: float) -> float:
    """Margin moved by the step eps * sign(w): eps * ||w||_1."""
    return eps * _lp(model.w, 1)


# --- search on piecewise-linear models ---------------------------------------

class _Oracle:
    """Counts every model evaluation."""

    def __init__(self, model: Model):
        self.model = model
        self.calls = 0

    def flipped(self, y, origin: int) -> bool:
        self.calls += 1
        return networks.classify(self.model, y) != origin


def _bisect(oracle: _Oracle, x, u, lo: float, hi: float, origin: int, tol: float) -> float:
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if oracle.flipped(x + mid * u, origin):
            hi = mid
        else:
            lo = mid
    return hi


def search_budget(x, shape: Optional[ShapeSpec] = None) -> float:
    """10 * radius_of(enclosing shape); without a shape, the ball of radius |x| + 1."""
    if shape is not None:
        return 10.0 * geometry.radius_of(shape)
    return 10.0 * (float(np.linalg.norm(x)) + 1.0)


def min_perturbation_search(model: Model, x, tol: float = None, budget: float = None,
                            seed: Seed = Seed(value=0), shape: Optional[ShapeSpec] = None) -> PerturbationResult:
    """Certified upper bound on the minimal L2 flip distance.

    Gradient direction toward the runner-up class, doubling bracket,
    bisection to relative tol, then up to REFINE_ROUNDS of orthogonal nudges
    kept only when they shrink the flip radius. The bracket gives up past
    `budget`, by default search_budget(x, shape).
    """
    tol = tol or config.SEARCH_TOL
    require(1e-6 <= tol <= 1e-2, f"tol must lie in [1e-6, 1e-2], got {tol}")
    x = np.asarray(x, dtype=float)
    budget = budget or search_budget(x, shape)
    z = networks.logits(model, x)[0]
    origin = int(z[1] > z[0])
    margin = abs(z[1] - z[0])
    require(margin > 0.0, "x sits on the decision boundary (zero margin)")
    oracle = _Oracle(model)
    rng = substream(seed)

    g = networks.margin_gradient(model, x, 1 - origin)
    gn = float(np.linalg.norm(g))
    if gn > 0:
        u = g / gn
        r = margin / gn
    else:
        u = rng.standard_normal(x.shape)
        u /= np.linalg.norm(u)
        r = tol * max(1.0, float(np.linalg.norm(x)))

    lo = 0.0
    while not oracle.flipped(x + r * u, origin):
        lo = r
        r *= 2.0
        if r > budget:
            raise NoFlipWithinBudget(budget, oracle.calls)
    hi = _bisect(oracle, x, u, lo, r, origin, tol)

    spread = 0.5
    for _ in range(config.REFINE_ROUNDS):
        if x.size < 2:
            break
        xi = rng.standard_normal(x.shape)
        xi -= (xi @ u) * u
        norm_xi = np.linalg.norm(xi)
        if norm_xi == 0:
            continue
        v = u + spread * xi / norm_xi
        v /= np.linalg.norm(v)
        # only worth bisecting if v already flips inside the current radius
        inside = hi * (1.0 - tol)
        if oracle.flipped(x + inside * v, origin):
            hi_v = _bisect(oracle, x, v, 0.0, inside, origin, tol)
            if hi_v < hi:
                u, hi = v, hi_v
                continue
        spread *= 0.7

    p = hi * u
    if not oracle.flipped(x + p, origin):
        raise CertificateError(f"x + p at radius {hi:.6g} no longer flips on re-evaluation")
    return PerturbationResult(p=p, norm=float(np.linalg.norm(p)), flipped=True, evaluations=oracle.calls)


def grid_search_perturbation(model: Model, x, radius: float, resolution: int = 1000) -> PerturbationResult:
    """Brute-force 2-D oracle: the closest flipped point on a resolution^2 grid."""
    x = np.asarray(x, dtype=float)
    require(x.shape == (2,), "grid search is a two-dimensional oracle")
    origin = networks.classify(model, x)
    axis = np.linspace(-radius, radius, resolution)
    best, best_norm = None, math.inf
    for row in axis:
        P = np.stack([np.full(resolution, row), axis], axis=1)
        hits = networks.predict(model, x + P) != origin
        if hits.any():
            norms = np.linalg.norm(P[hits], axis=1)
            j = int(np.argmin(norms))
            if norms[j] < best_norm:
                best, best_norm = P[hits][j], float(norms[j])
    if best is None:
        return PerturbationResult(p=np.zeros(2), norm=0.0, flipped=False, evaluations=resolution**2)
    return PerturbationResult(p=best, norm=best_norm, flipped=True, evaluations=resolution**2)


# --- scaling experiment -------------------------------------------------------

def predicted_exponent(radius_law: str) -> float:
    return -1.0 if radius_law == "constant" else -0.5


def _idealized_row(spec: SystemSpec, trials: int, seed: Seed) -> ScalingRow:
    shape = networks.positive_shape(spec)
    rng = substream(seed, spec.n, 2)
    pts = sample_uniform_batch(shape, trials, rng)
    d = np.nan_to_num(geometry.distance_to_surface_batch(shape, pts), nan=0.0)
    return ScalingRow(
        n=spec.n,
        mean_norm=float(d.mean()),
        norm_stderr=float(d.std(ddof=1) / math.sqrt(len(d))),
        count=len(d),
        empirical_radius=geometry.radius_of(shape),
        shape_radius=geometry.radius_of(shape),
    )


def empirical_radius(points: np.ndarray, cap: int = 2000) -> Optional[float]:
    """Half the maximum pairwise distance."""
    if len(points) < 2:
        return None
    return 0.5 * float(np.max(pdist(points[:cap])))


def _trained_row(spec: SystemSpec, trials: int, sgd: SgdConfig, seed: Seed, tol: float,
                 on_trained: Optional[Callable[[TrainedSystem], None]] = None) -> ScalingRow:
    system = networks.train(spec, sgd, seed)
    if on_trained is not None:
        on_trained(system)
    shape_radius = geometry.radius_of(system.data.positive_shape)
    if system.val_accuracy < config.MIN_VALIDATION_ACCURACY:
        logger.warning("n=%d aborted: validation accuracy %.3f", spec.n, system.val_accuracy)
        return ScalingRow(n=spec.n, val_accuracy=system.val_accuracy, shape_radius=shape_radius,
                          aborted=f"validation accuracy {system.val_accuracy:.3f} < {config.MIN_VALIDATION_ACCURACY}")
    X_val = system.data.X_val
    positives = X_val[networks.predict(system.model, X_val) == 1]
    if len(positives) < 2:
        return ScalingRow(n=spec.n, val_accuracy=system.val_accuracy, shape_radius=shape_radius,
                          aborted="fewer than two positively classified validation points")
    positives = positives[:trials]
    if isinstance(system.model, LinearModel):
        norms = [min_perturbation_linear(system.model, x).norm for x in positives]
    else:
        norms = []
        for i, x in enumerate(positives):
            try:
                norms.append(min_perturbation_search(system.model, x, tol, seed=seed.child(i),
                                                     shape=system.data.positive_shape).norm)
            except (NoFlipWithinBudget, DomainError) as e:
                logger.warning("n=%d point %d skipped: %s", spec.n, i, e.detail)
        if len(norms) < 2:
            return ScalingRow(n=spec.n, val_accuracy=system.val_accuracy, shape_radius=shape_radius,
                              aborted="fewer than two points flipped within budget")
    norms = np.asarray(norms)
    return ScalingRow(
        n=spec.n,
        mean_norm=float(norms.mean()),
        norm_stderr=float(norms.std(ddof=1) / math.sqrt(len(norms))),
        count=len(norms),
        val_accuracy=system.val_accuracy,
        empirical_radius=empirical_radius(positives),
        shape_radius=shape_radius,
    )


def scaling_experiment(n_values: Sequence[int], trials_per_n: int, template: SystemSpec, seed: Seed,
                       sgd: SgdConfig = None, tol: float = None,
                       on_trained: Optional[Callable[[TrainedSystem], None]] = None) -> ScalingReport:
    """Mean minimal perturbation against resolution, fitted as a power law in n.

    `on_trained` sees every trained system before it is attacked.
    """
    ns = sorted(set(int(n) for n in n_values))
    require(len(ns) >= 4, f"need >= 4 resolutions, got {ns}")
    require(ns[-1] / ns[0] >= 4, "resolutions must span at least two octaves")
    require(trials_per_n >= 2, f"trials_per_n must be >= 2, got {trials_per_n}")
    idealized = template.model == "idealized"
    sgd = sgd or SgdConfig(seed=seed.value)
    tol = tol or config.SEARCH_TOL

    def run(n):
        spec = template.model_copy(update={"n": n})
        if idealized:
            return _idealized_row(spec, trials_per_n, seed)
        return _trained_row(spec, trials_per_n, sgd, seed, tol, on_trained)

    rows: List[ScalingRow] = ordered_map(run, ns)
    usable = [r for r in rows if r.aborted is None and r.mean_norm and r.mean_norm > 0]
    exponent = exponent_se = None
    if len(usable) >= 3:
        fit = stats.linregress(np.log([r.n for r in usable]), np.log([r.mean_norm for r in usable]))
        exponent, exponent_se = float(fit.slope), float(fit.stderr)
        logger.info("perturbation exponent %.4f +/- %.4f", exponent, exponent_se)
    else:
        logger.warning("only %d usable resolutions; no exponent fitted", len(usable))
    return ScalingReport(
        mode="idealized" if idealized else "trained",
        radius_law=template.radius_law,
        rows=rows,
        exponent=exponent,
        exponent_stderr=exponent_se,
        predicted_exponent=predicted_exponent(template.radius_law),
    )


# --- fake examples ------------------------------------------------------------

def fake_example_ascent(model: Model, start, target_class: int = 1, step: float = 0.01,
                        max_iters: int = 10_000) -> AscentResult:
    """x <- x + step * grad(logit_target - logit_other) until confidence >= 0.99."""
    require(target_class in (0, 1), f"target_class must be 0 or 1, got {target_class}")
    require(step >= 0, f"step must be >= 0, got {step}")
    x = np.asarray(start, dtype=float).copy()
    g = networks.margin_gradient(model, x, target_class)
    if not np.any(g != 0):
        raise NoAscentDirection("zero input gradient at the starting image")
    trace = [float(networks.confidence(model, x, target_class)[0])]
    it = 0
    while trace[-1] < config.ASCENT_TARGET_CONFIDENCE and it < max_iters:
        x = x + step * networks.margin_gradient(model, x, target_class)
        trace.append(float(networks.confidence(model, x, target_class)[0]))
        it += 1
    return AscentResult(image=x, confidence_trace=trace, iterations=it,
                        reached=trace[-1] >= config.ASCENT_TARGET_CONFIDENCE)


def noise_image(n: int, seed: Seed, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    return substream(seed).uniform(low, high, n)
