from botlens.classifiers.forest import (
    ForestParams,
    RandomForestModel,
    Tree,
    fit_tree,
    gini_impurity,
    train_random_forest,
)
from botlens.classifiers.metrics import EvalMetrics, evaluate, predict, predict_proba
from botlens.classifiers.mlp import MLPConfig, MLPModel, train_mlp
from botlens.classifiers.persistence import load_model, model_from_dict, model_to_dict, save_model
from botlens.errors import DataError


def train_model(kind: str, train, seed: int = 0, forest_params=None, mlp_config=None, classes=None):
    """Dispatch on model kind (``forest`` or ``mlp``)."""
    if kind == "forest":
        return train_random_forest(train, forest_params, seed, classes)
    if kind == "mlp":
        return train_mlp(train, mlp_config, seed, classes)
    raise DataError(f"unknown model kind {kind!r}")


__all__ = [
    "EvalMetrics",
    "ForestParams",
    "MLPConfig",
    "MLPModel",
    "RandomForestModel",
    "Tree",
    "evaluate",
    "fit_tree",
    "gini_impurity",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "predict_proba",
    "save_model",
    "train_mlp",
    "train_model",
    "train_random_forest",
]
