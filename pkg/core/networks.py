"""Small in-library classifiers: forward passes, input gradients, SGD training."""
import logging
import math

import numpy as np

import config
from core import geometry
from core.errors import DomainError, TrainingDivergence, require
from core.montecarlo import sample_uniform_batch
from core.parallel import substream
from models.adversarial import Dataset, LinearModel, MlpModel, Model, SgdConfig, SystemSpec, TrainedSystem
from models.geometry import ShapeSpec
from models.sampling import Seed

logger = logging.getLogger("Trainer")


# --- inference --------------------------------------------------------------

def logits(model: Model, X) -> np.ndarray:
    """(m, 2) logits; for a linear model logit_0 = 0 and logit_1 = w.x + b."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(model, LinearModel):
        z = X @ model.w + model.b
        return np.stack([np.zeros_like(z), z], axis=1)
    H = np.maximum(X @ model.W1.T + model.b1, 0.0)
    return H @ model.W2.T + model.b2


def predict(model: Model, X) -> np.ndarray:
    z = logits(model, X)
    return (z[:, 1] > z[:, 0]).astype(np.int64)  # ties go to class 0


def classify(model: Model, x) -> int:
    return int(predict(model, np.asarray(x, dtype=float)[None, :])[0])


def confidence(model: Model, X, target: int) -> np.ndarray:
    z = logits(model, X)
    margin = z[:, target] - z[:, 1 - target]
    return 1.0 / (1.0 + np.exp(-np.clip(margin, -700.0, 700.0)))


def margin_gradient(model: Model, x, target: int) -> np.ndarray:
    """d(logit_target - logit_other)/dx at a single point."""
    sign = 1.0 if target == 1 else -1.0
    if isinstance(model, LinearModel):
        return sign * model.w
    x = np.asarray(x, dtype=float)
    active = (model.W1 @ x + model.b1) > 0.0
    head = model.W2[1] - model.W2[0]
    return sign * ((head * active) @ model.W1)


def accuracy(model: Model, X, y) -> float:
    return float(np.mean(predict(model, X) == y))


# --- data -------------------------------------------------------------------

def positive_shape(spec: SystemSpec) -> ShapeSpec:
    if spec.radius_law == "kbit_box":
        cube = geometry.kbit_cube(spec.n, spec.bits)
        return ShapeSpec.cube(spec.n, cube.half_widths[0] * spec.radius_scale)
    R = spec.radius_scale * (math.sqrt(spec.n) if spec.radius_law == "sqrt_n" else 1.0)
    return ShapeSpec.ball(spec.n, R)


def _scale_shape(shape: ShapeSpec, factor: float) -> ShapeSpec:
    if shape.kind == "ball":
        return ShapeSpec.ball(shape.dim, shape.radius * factor)
    return ShapeSpec.box([h * factor for h in shape.half_widths])


def sample_negatives(spec: SystemSpec, shape: ShapeSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    factor = 1.0 + spec.shell_width / spec.n
    if spec.negatives == "shell":
        outer = _scale_shape(shape, factor)
    else:
        outer = ShapeSpec.cube(spec.n, geometry.radius_of(shape) * factor if shape.kind == "ball"
                               else shape.half_widths[0] * factor)
    if shape.kind == "ball" and spec.negatives == "shell":
        # exact draw from the annulus: radius^n uniform on ((R)^n, (fR)^n]
        g = rng.standard_normal((count, spec.n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        u = 1.0 - rng.random(count)
        grow = math.expm1(spec.n * math.log(factor))
        r = shape.radius * np.exp(np.log1p(u * grow) / spec.n)
        return g * r[:, None]
    out = []
    need = count
    while need > 0:
        pts = sample_uniform_batch(outer, max(2 * need, 64), rng)
        pts = pts[~geometry.membership(shape, pts)]
        out.append(pts[:need])
        need -= len(out[-1])
    return np.concatenate(out)[:count]


def make_dataset(spec: SystemSpec, seed: Seed) -> Dataset:
    rng = substream(seed, spec.n, 0)
    shape = positive_shape(spec)
    pos = sample_uniform_batch(shape, spec.per_class, rng)
    neg = sample_negatives(spec, shape, spec.per_class, rng)
    X = np.concatenate([pos, neg])
    y = np.concatenate([np.ones(spec.per_class, dtype=np.int64), np.zeros(spec.per_class, dtype=np.int64)])
    order = rng.permutation(len(X))
    X, y = X[order], y[order]
    n_val = max(1, int(round(spec.validation_fraction * len(X))))
    return Dataset(X_train=X[n_val:], y_train=y[n_val:], X_val=X[:n_val], y_val=y[:n_val],
                   positive_shape=shape)


# --- training ---------------------------------------------------------------

def _init_params(kind: str, n: int, width: int, rng: np.random.Generator) -> dict:
    if kind == "linear":
        return {"w": rng.standard_normal(n) / math.sqrt(n), "b": np.zeros(1)}
    return {
        "W1": rng.standard_normal((width, n)) * math.sqrt(2.0 / n),
        "b1": np.zeros(width),
        "W2": rng.standard_normal((2, width)) / math.sqrt(width),
        "b2": np.zeros(2),
    }


def _loss_and_grads(kind: str, P: dict, X: np.ndarray, y: np.ndarray):
    m = len(X)
    if kind == "linear":
        z = X @ P["w"] + P["b"][0]
        # logistic loss on labels {0, 1}
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        r = (1.0 / (1.0 + np.exp(-np.clip(z, -700, 700))) - y) / m
        return loss, {"w": X.T @ r, "b": np.array([r.sum()])}
    Z1 = X @ P["W1"].T + P["b1"]
    H = np.maximum(Z1, 0.0)
    Z2 = H @ P["W2"].T + P["b2"]
    Z2 = Z2 - Z2.max(axis=1, keepdims=True)
    logp = Z2 - np.log(np.sum(np.exp(Z2), axis=1, keepdims=True))
    loss = float(-np.mean(logp[np.arange(m), y]))
    dZ2 = np.exp(logp)
    dZ2[np.arange(m), y] -= 1.0
    dZ2 /= m
    dH = dZ2 @ P["W2"]
    dZ1 = dH * (Z1 > 0)
    return loss, {"W1": dZ1.T @ X, "b1": dZ1.sum(axis=0), "W2": dZ2.T @ H, "b2": dZ2.sum(axis=0)}


def _to_model(kind: str, P: dict, scale: float) -> Model:
    # inputs were multiplied by `scale` during training; fold it into the first layer
    if kind == "linear":
        return LinearModel(w=P["w"] * scale, b=float(P["b"][0]))
    return MlpModel(W1=P["W1"] * scale, b1=P["b1"].copy(), W2=P["W2"].copy(), b2=P["b2"].copy())


def fit(kind: str, X: np.ndarray, y: np.ndarray, sgd: SgdConfig, width: int = None, scale: float = 1.0):
    """Minibatch SGD with momentum; returns (model, initial model, final epoch loss)."""
    require(sgd.lr >= 0, f"lr must be >= 0, got {sgd.lr}")
    require(kind in ("linear", "mlp"), f"cannot train model kind {kind!r}")
    width = width or config.MLP_WIDTH
    rng = substream(Seed(value=sgd.seed), 1)
    Xs = X * scale
    P = _init_params(kind, X.shape[1], width, rng)
    initial = _to_model(kind, P, scale)
    V = {k: np.zeros_like(v) for k, v in P.items()}
    loss = float("nan")
    for epoch in range(sgd.epochs):
        order = rng.permutation(len(Xs))
        total = 0.0
        for start in range(0, len(order), sgd.batch):
            idx = order[start:start + sgd.batch]
            batch_loss, G = _loss_and_grads(kind, P, Xs[idx], y[idx])
            if not math.isfinite(batch_loss):
                raise TrainingDivergence(epoch)
            total += batch_loss * len(idx)
            for k in P:
                V[k] = sgd.momentum * V[k] - sgd.lr * G[k]
                P[k] = P[k] + V[k]
        loss = total / len(Xs)
        if (epoch + 1) % 50 == 0:
            logger.debug("epoch %d loss %.5f", epoch + 1, loss)
    return _to_model(kind, P, scale), initial, loss


def train(spec: SystemSpec, sgd: SgdConfig, seed: Seed = None, data: Dataset = None) -> TrainedSystem:
    if spec.model == "idealized":
        raise DomainError("the idealized system has no trainable model")
    if data is None:
        require(spec.per_class >= 200, f"need >= 200 points per class, got {spec.per_class}")
        data = make_dataset(spec, seed or Seed(value=sgd.seed))
    require(len(data.y_train) >= 2 and len(np.unique(data.y_train)) == 2, "training data needs both classes")
    scale = 1.0 / max(float(np.sqrt(np.mean(np.sum(data.X_train**2, axis=1)))), 1e-12)
    model, initial, loss = fit(spec.model, data.X_train, data.y_train, sgd, spec.width, scale)
    system = TrainedSystem(
        spec=spec,
        model=model,
        data=data,
        initial_accuracy=accuracy(initial, data.X_val, data.y_val),
        train_accuracy=accuracy(model, data.X_train, data.y_train),
        val_accuracy=accuracy(model, data.X_val, data.y_val),
        final_loss=loss,
    )
    logger.info("n=%d %s: train %.3f, validation %.3f", spec.n, spec.model,
                system.train_accuracy, system.val_accuracy)
    return system
