"""Versioned JSON persistence for fitted models.

Floats are written with Python's round-tripping repr, so a loaded model
reproduces the saved model's predictions bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from botlens.classifiers.forest import ForestParams, RandomForestModel, Tree
from botlens.classifiers.mlp import MLPConfig, MLPModel
from botlens.errors import DataError
from botlens.schema import ClassLabel, FeatureSchema

FORMAT_VERSION = 1


def _schema_dict(schema: FeatureSchema) -> dict:
    return {"names": list(schema.names), "categories": list(schema.categories), "kinds": list(schema.kinds)}


def model_to_dict(model, training=None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "model_kind": model.kind,
        "schema": _schema_dict(model.schema),
        "classes": [c.token for c in model.classes],
        "seed": model.seed,
    }
    if model.kind == "forest":
        doc["hyperparams"] = asdict(model.params)
        doc["trees"] = [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
                "n_samples": t.n_samples.tolist(),
                "impurity": t.impurity.tolist(),
            }
            for t in model.trees
        ]
    elif model.kind == "mlp":
        cfg = asdict(model.config)
        cfg["hidden_sizes"] = list(cfg["hidden_sizes"])
        doc["hyperparams"] = cfg
        doc["layer_sizes"] = model.layer_sizes
        doc["weights"] = [w.tolist() for w in model.weights]
        doc["biases"] = [b.tolist() for b in model.biases]
        doc["standardization"] = {"mean": model.mean.tolist(), "std": model.std.tolist()}
        doc["loss_history"] = list(model.loss_history)
    else:
        raise DataError(f"unknown model kind {model.kind!r}")
    if training:
        doc["training"] = training
    return doc


def model_from_dict(doc: dict):
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format_version {doc.get('format_version')!r}", "bad_model")
    s = doc["schema"]
    schema = FeatureSchema(tuple(s["names"]), tuple(s["categories"]), tuple(s["kinds"]))
    classes = tuple(ClassLabel.parse(c) for c in doc["classes"])
    kind = doc.get("model_kind")
    if kind == "forest":
        trees = tuple(
            Tree(
                np.array(t["feature"], dtype=np.int64),
                np.array(t["threshold"], dtype=float),
                np.array(t["left"], dtype=np.int64),
                np.array(t["right"], dtype=np.int64),
                np.array(t["value"], dtype=float).reshape(len(t["feature"]), len(classes)),
                np.array(t["n_samples"], dtype=np.int64),
                np.array(t["impurity"], dtype=float),
            )
            for t in doc["trees"]
        )
        return RandomForestModel(trees, ForestParams(**doc["hyperparams"]), schema, classes, doc["seed"])
    if kind == "mlp":
        st = doc["standardization"]
        return MLPModel(
            tuple(np.array(w, dtype=float) for w in doc["weights"]),
            tuple(np.array(b, dtype=float) for b in doc["biases"]),
            np.array(st["mean"], dtype=float),
            np.array(st["std"], dtype=float),
            schema,
            classes,
            MLPConfig(**doc["hyperparams"]),
            doc["seed"],
            tuple(doc.get("loss_history", ())),
        )
    raise DataError(f"unknown model kind {kind!r}", "bad_model")


def save_model(model, path, training=None) -> None:
    """Write ``model`` as JSON; ``training`` (config, seed, metrics) is kept verbatim."""
    Path(path).write_text(json.dumps(model_to_dict(model, training), sort_keys=True), encoding="utf-8")


def load_model(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such model file: {path}", "missing_file")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a JSON model document ({exc})", "bad_model") from None
    return model_from_dict(doc)


def training_info(path) -> dict:
    """The ``training`` block stored alongside a model, if any."""
    return json.loads(Path(path).read_text(encoding="utf-8")).get("training", {})
