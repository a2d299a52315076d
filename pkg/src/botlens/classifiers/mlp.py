"""Multilayer perceptron with three ReLU hidden layers and a softmax output."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from botlens.classifiers.forest import _as_matrix, _infer_classes
from botlens.errors import DataError, NumericalError
from botlens.schema import ClassLabel, FeatureSchema


@dataclass(frozen=True)
class MLPConfig:
    hidden_sizes: tuple[int, ...] = (64, 32, 16)
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 40
    optimizer: str = "adam"  # or "sgd"
    l2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if len(self.hidden_sizes) != 3:
            raise DataError("the network has exactly three hidden layers")
        if min(self.hidden_sizes) < 1:
            raise DataError("hidden layer widths must be positive")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise DataError("learning_rate, batch_size and epochs must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise DataError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True, eq=False)
class MLPModel:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    mean: np.ndarray
    std: np.ndarray
    schema: FeatureSchema
    classes: tuple[ClassLabel, ...]
    config: MLPConfig
    seed: int
    loss_history: tuple[float, ...] = ()
    kind: str = field(default="mlp", init=False)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0], *(w.shape[1] for w in self.weights)]

    def standardize(self, X) -> np.ndarray:
        return (X - self.mean) / self.std

    def predict_proba(self, X) -> np.ndarray:
        X = _as_matrix(X, len(self.schema))
        return forward(self.weights, self.biases, self.standardize(X))[-1]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(weights, biases, X) -> list[np.ndarray]:
    """Activations of every layer, input first and class probabilities last."""
    acts = [X]
    h = X
    last = len(weights) - 1
    for k, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W + b
        h = softmax(z) if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def loss_and_grads(weights, biases, X, Y, l2: float = 0.0):
    """Mean cross-entropy against one-hot ``Y`` and its gradients."""
    acts = forward(weights, biases, X)
    P = acts[-1]
    n = X.shape[0]
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n
    if l2:
        loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W in weights)
    gW = [None] * len(weights)
    gb = [None] * len(weights)
    delta = (P - Y) / n
    for k in range(len(weights) - 1, -1, -1):
        gW[k] = acts[k].T @ delta + l2 * weights[k]
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ weights[k].T) * (acts[k] > 0)
    return float(loss), gW, gb


def init_params(layer_sizes, rng: np.random.Generator):
    """He-scaled uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def train_mlp(train, config: Optional[MLPConfig] = None, seed: int = 0, classes=None) -> MLPModel:
    """Mini-batch training on cross-entropy.

    Raises NumericalError as soon as the epoch loss stops being finite.
    """
    config = config or MLPConfig()
    train.require_labels()
    if len(train) == 0:
        raise DataError("cannot train on an empty dataset")
    classes = tuple(classes) if classes is not None else _infer_classes(train.labels)
    index = {int(c): k for k, c in enumerate(classes)}
    try:
        y = np.array([index[int(c)] for c in train.labels], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"label {exc} not among model classes") from None

    X = np.asarray(train.X, dtype=float)
    mean, std = standardization(X)
    Xs = (X - mean) / std
    Y = np.eye(len(classes))[y]
    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *config.hidden_sizes, len(classes)]
    weights, biases = init_params(sizes, rng)

    params = [*weights, *biases]
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []
    n = len(Xs)
    bs = min(config.batch_size, n)
    L = len(weights)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            batch = order[start : start + bs]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gW, gb = loss_and_grads(weights, biases, Xs[batch], Y[batch], config.l2)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}, batch starting {start}")
            total += loss * len(batch)
            grads = [*gW, *gb]
            step += 1
            for k, (p, g) in enumerate(zip(params, grads)):
                if config.optimizer == "adam":
                    m1[k] = beta1 * m1[k] + (1 - beta1) * g
                    m2[k] = beta2 * m2[k] + (1 - beta2) * g * g
                    mhat = m1[k] / (1 - beta1**step)
                    vhat = m2[k] / (1 - beta2**step)
                    p -= config.learning_rate * mhat / (np.sqrt(vhat) + eps)
                else:
                    p -= config.learning_rate * g
        history.append(total / n)
        if not np.isfinite(history[-1]):
            raise NumericalError(f"non-finite training loss at epoch {epoch}")
    weights, biases = params[:L], params[L:]
    return MLPModel(
        tuple(weights), tuple(biases), mean, std, train.schema, classes, config, seed, tuple(history)
    )
