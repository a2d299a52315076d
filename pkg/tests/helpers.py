"""Small models and datasets shared by the tests."""

import numpy as np

from botlens.dataset import LabeledDataset
from botlens.schema import BINARY_CLASSES, FeatureSchema


def toy_schema(d: int, kind: str = "amount") -> FeatureSchema:
    return FeatureSchema(
        tuple(f"f{i}" for i in range(d)),
        ("player_action",) * d,
        (kind,) * d,
    )


def toy_dataset(X, labels=None, kind: str = "amount") -> LabeledDataset:
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    labels = np.full(n, -1) if labels is None else labels
    return LabeledDataset(toy_schema(d, kind), tuple(f"r{i}" for i in range(n)), X, labels)


class LinearProbModel:
    """P(bot) = clip(b + x.w, 0, 1): a model whose local slopes are known."""

    kind = "oracle"

    def __init__(self, w, b=0.5, schema=None):
        self.w = np.asarray(w, dtype=float)
        self.b = b
        self.schema = schema or toy_schema(len(self.w))
        self.classes = BINARY_CLASSES

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        p = np.clip(self.b + X @ self.w, 0.0, 1.0)
        return np.column_stack([1 - p, p])


class FunctionModel:
    """Wraps ``f(X) -> P(bot)`` as a binary classifier."""

    kind = "oracle"

    def __init__(self, f, d):
        self.f = f
        self.schema = toy_schema(d)
        self.classes = BINARY_CLASSES

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        p = self.f(X)
        return np.column_stack([1 - p, p])
