from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from botlens.errors import DataError, NumericalError
from botlens.schema import ClassLabel


@dataclass(frozen=True, eq=False)
class GlobalImportance:
    """Dataset-level feature scores.

    ``scores`` are non-negative and aligned to ``feature_names``; ``ranking``
    lists feature indices by descending score (ties keep schema order).
    ``raw`` keeps unclipped values where the method can go negative.
    """

    method: str
    feature_names: tuple[str, ...]
    scores: np.ndarray
    raw: Optional[np.ndarray] = None
    attributions: tuple = field(default=())

    @property
    def ranking(self) -> np.ndarray:
        return rank_desc(self.scores)

    def top(self, k: int) -> list[str]:
        return [self.feature_names[i] for i in self.ranking[:k]]

    def to_dict(self) -> dict:
        raw = self.raw if self.raw is not None else self.scores
        return {
            "method": self.method,
            "weights": [
                {"feature": n, "value": float(s), "raw": float(r)}
                for n, s, r in zip(self.feature_names, self.scores, raw)
            ],
            "ranking": [self.feature_names[i] for i in self.ranking],
        }


@dataclass(frozen=True, eq=False)
class FeatureAttribution:
    """Per-instance signed attribution toward ``target_class``.

    ``weights`` is dense over the schema; for LIME only the ``selected``
    top-k entries are non-zero. ``base_value`` is the surrogate intercept for
    LIME and the background expectation for SHAP.
    """

    method: str
    instance_id: Optional[str]
    target_class: ClassLabel
    feature_names: tuple[str, ...]
    weights: np.ndarray
    base_value: float
    prediction: float
    selected: tuple[int, ...] = ()
    score: Optional[float] = None

    @property
    def ranking(self) -> np.ndarray:
        return rank_desc(np.abs(self.weights))

    def to_dict(self) -> dict:
        idx = self.selected if self.selected else tuple(int(i) for i in self.ranking)
        doc = {
            "method": self.method,
            "instance_id": self.instance_id,
            "target_class": self.target_class.token,
            "base_value": self.base_value,
            "prediction": self.prediction,
            "weights": [{"feature": self.feature_names[i], "value": float(self.weights[i])} for i in idx],
            "ranking": [self.feature_names[i] for i in idx],
        }
        if self.score is not None:
            doc["score"] = self.score
        return doc


def rank_desc(values) -> np.ndarray:
    return np.argsort(-np.asarray(values, dtype=float), kind="stable")


def target_index(model, target_class) -> int:
    target = ClassLabel(target_class)
    if target not in model.classes:
        raise DataError(f"model has no class {target.token!r}")
    return model.classes.index(target)


def class_probability(model, X, column: int) -> np.ndarray:
    p = model.predict_proba(X)[:, column]
    if not np.all(np.isfinite(p)):
        raise NumericalError("model produced non-finite probabilities")
    return p


def check_schema(model, ds) -> None:
    if tuple(ds.schema.names) != tuple(model.schema.names):
        raise DataError("dataset schema differs from the model schema", "schema_mismatch")
