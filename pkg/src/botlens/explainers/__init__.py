from botlens.explainers.base import FeatureAttribution, GlobalImportance
from botlens.explainers.importance import impurity_importance, permutation_importance
from botlens.explainers.lime import LimeConfig, SpLimeResult, lime_explain, sp_lime, submodular_pick
from botlens.explainers.shap import ShapConfig, kernel_shap, shap_global

__all__ = [
    "FeatureAttribution",
    "GlobalImportance",
    "LimeConfig",
    "ShapConfig",
    "SpLimeResult",
    "impurity_importance",
    "kernel_shap",
    "lime_explain",
    "permutation_importance",
    "shap_global",
    "sp_lime",
    "submodular_pick",
]
