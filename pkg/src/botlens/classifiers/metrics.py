from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from botlens.errors import DataError, NumericalError
from botlens.schema import ClassLabel


@dataclass(frozen=True)
class EvalMetrics:
    """Validation summary.

    ``confusion[i, j]`` counts records of true class ``classes[i]`` predicted
    as ``classes[j]``. ``false_positive_count`` is the number of Human or
    HeavyUser records predicted Bot.
    """

    classes: tuple[ClassLabel, ...]
    confusion: np.ndarray
    accuracy: float
    false_positive_count: int

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "classes": [c.token for c in self.classes],
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "false_positive_count": self.false_positive_count,
            "total": self.total,
        }


def predict_proba(model, record) -> np.ndarray:
    """Class probabilities for one record (PlayerRecord or feature vector)."""
    features = getattr(record, "features", record)
    p = model.predict_proba(np.asarray(features, dtype=float))[0]
    if not np.all(np.isfinite(p)):
        raise NumericalError("model produced non-finite probabilities")
    return p


def predict(model, X) -> np.ndarray:
    """Predicted ClassLabel codes; ties go to the lowest class index."""
    P = model.predict_proba(X)
    codes = np.array([int(c) for c in model.classes])
    return codes[np.argmax(P, axis=1)]


def metrics_from_predictions(classes, true_codes, pred_codes) -> EvalMetrics:
    classes = tuple(ClassLabel(c) for c in classes)
    pos = {int(c): k for k, c in enumerate(classes)}
    for code in np.unique(true_codes):
        if int(code) not in pos:
            raise DataError(f"label {ClassLabel(int(code)).token} not among model classes")
    C = len(classes)
    conf = np.zeros((C, C), dtype=np.int64)
    t = np.array([pos[int(c)] for c in true_codes], dtype=np.int64)
    p = np.array([pos[int(c)] for c in pred_codes], dtype=np.int64)
    np.add.at(conf, (t, p), 1)
    total = conf.sum()
    accuracy = float(np.trace(conf) / total) if total else 0.0
    true_arr = np.asarray(true_codes)
    pred_arr = np.asarray(pred_codes)
    human_like = (true_arr == ClassLabel.HUMAN) | (true_arr == ClassLabel.HEAVY_USER)
    fp = int(np.sum(human_like & (pred_arr == ClassLabel.BOT)))
    return EvalMetrics(classes, conf, accuracy, fp)


def evaluate(model, ds) -> EvalMetrics:
    ds.require_labels()
    if tuple(ds.schema.names) != tuple(model.schema.names):
        raise DataError("dataset schema differs from the model schema", "schema_mismatch")
    return metrics_from_predictions(model.classes, ds.labels, predict(model, ds.X))
