"""Faithfulness by feature deletion, false-positive mining and heavy-user
three-class refinement."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from botlens.classifiers import EvalMetrics, evaluate, predict, train_model
from botlens.classifiers.forest import ForestParams
from botlens.classifiers.mlp import MLPConfig
from botlens.dataset import LabeledDataset, rebalance, stratified_split
from botlens.errors import DataError
from botlens.explainers.base import FeatureAttribution, GlobalImportance
from botlens.explainers.lime import LimeConfig, lime_explain, perturbation_scale
from botlens.schema import THREE_CLASSES, ClassLabel

DEFAULT_RULE_FEATURES = ("exp_get_ratio", "collect_max_count", "exp_get_count_per_day")


@dataclass(frozen=True)
class TrainSettings:
    """Everything that shapes one train/evaluate run besides the data."""

    model_kind: str = "forest"
    train_fraction: float = 0.9
    rebalance: Optional[str] = "oversample"
    forest: ForestParams = field(default_factory=ForestParams)
    mlp: MLPConfig = field(default_factory=MLPConfig)

    def to_dict(self) -> dict:
        d = {"model_kind": self.model_kind, "train_fraction": self.train_fraction, "rebalance": self.rebalance}
        if self.model_kind == "forest":
            d["forest"] = asdict(self.forest)
        else:
            mlp = asdict(self.mlp)
            mlp["hidden_sizes"] = list(mlp["hidden_sizes"])
            d["mlp"] = mlp
        return d


def prepare_training(train: LabeledDataset, settings: TrainSettings, seed: int) -> LabeledDataset:
    if settings.rebalance:
        return rebalance(train, settings.rebalance, seed)
    return train


def fit(train: LabeledDataset, settings: TrainSettings, seed: int, classes=None):
    return train_model(
        settings.model_kind,
        prepare_training(train, settings, seed),
        seed,
        forest_params=settings.forest,
        mlp_config=settings.mlp,
        classes=classes,
    )


# -- top features ----------------------------------------------------------


@dataclass(frozen=True)
class FeatureFrequency:
    feature: str
    count: int
    mean_abs_weight: float


def feature_frequencies(attributions: Sequence[FeatureAttribution]) -> list[FeatureFrequency]:
    """Features ranked by how many attributions select them, then by mean
    |weight| over those attributions, then by schema order."""
    if not attributions:
        return []
    names = attributions[0].feature_names
    d = len(names)
    counts = np.zeros(d, dtype=np.int64)
    sums = np.zeros(d)
    for a in attributions:
        sel = list(a.selected) if a.selected else list(np.flatnonzero(a.weights))
        counts[sel] += 1
        sums[sel] += np.abs(a.weights[sel])
    means = np.divide(sums, counts, out=np.zeros(d), where=counts > 0)
    order = sorted(range(d), key=lambda j: (-counts[j], -means[j], j))
    return [FeatureFrequency(names[j], int(counts[j]), float(means[j])) for j in order if counts[j] > 0]


def top_k_features(source, k: int = 2) -> list[str]:
    """First ``k`` features of a global ranking, or of the frequency ranking
    over a collection of attributions."""
    if k < 1:
        raise DataError("k must be >= 1")
    if isinstance(source, GlobalImportance):
        if k > len(source.feature_names):
            raise DataError(f"k={k} exceeds the {len(source.feature_names)} features")
        return source.top(k)
    attributions = list(source)
    if not attributions:
        raise DataError("no attributions to rank")
    if k > len(attributions[0].feature_names):
        raise DataError(f"k={k} exceeds the {len(attributions[0].feature_names)} features")
    freq = feature_frequencies(attributions)
    if len(freq) < k:
        raise DataError(f"only {len(freq)} features appear in the attributions, k={k}")
    return [f.feature for f in freq[:k]]


# -- deletion --------------------------------------------------------------


@dataclass(frozen=True)
class DeletionReport:
    explainer: str
    removed_features: tuple[str, ...]
    baseline: EvalMetrics
    post: EvalMetrics
    seed: int
    settings: TrainSettings

    @property
    def delta(self) -> float:
        return self.baseline.accuracy - self.post.accuracy

    def to_dict(self) -> dict:
        return {
            "experiment": "feature_deletion",
            "explainer": self.explainer,
            "seed": self.seed,
            "config": self.settings.to_dict(),
            "removed_features": list(self.removed_features),
            "baseline": self.baseline.to_dict(),
            "treatment": self.post.to_dict(),
            "delta": self.delta,
        }


def feature_deletion_experiment(
    ds: LabeledDataset,
    features_to_remove: Sequence[str],
    settings: Optional[TrainSettings] = None,
    seed: int = 0,
    explainer: str = "manual",
) -> DeletionReport:
    """Retrain without ``features_to_remove`` on the same split and seeds."""
    settings = settings or TrainSettings()
    removed = tuple(features_to_remove)
    ds.schema.indices(removed)
    if len(set(removed)) >= len(ds.schema):
        raise DataError("removing these features would empty the schema")
    train, val = stratified_split(ds, settings.train_fraction, seed)
    base_model = fit(train, settings, seed)
    baseline = evaluate(base_model, val)
    if removed:
        reduced = fit(train.drop_features(removed), settings, seed)
        post = evaluate(reduced, val.drop_features(removed))
    else:
        post = evaluate(fit(train, settings, seed), val)
    return DeletionReport(explainer, removed, baseline, post, seed, settings)


# -- false positives -------------------------------------------------------


def _human_like(labels) -> np.ndarray:
    labels = np.asarray(labels)
    return (labels == ClassLabel.HUMAN) | (labels == ClassLabel.HEAVY_USER)


def extract_false_positives(model, ds: LabeledDataset) -> LabeledDataset:
    """Human or HeavyUser records the model predicts as Bot."""
    ds.require_labels()
    pred = predict(model, ds.X)
    return ds.take(np.flatnonzero(_human_like(ds.labels) & (pred == ClassLabel.BOT)))


@dataclass(frozen=True, eq=False)
class FpMining:
    ranking: list  # [FeatureFrequency]
    attributions: list  # [FeatureAttribution], one per false positive

    def top(self, k: int) -> list[str]:
        return [f.feature for f in self.ranking[:k]]


def mine_fp_features(model, fps: LabeledDataset, background: LabeledDataset, cfg: Optional[LimeConfig] = None) -> FpMining:
    """LIME each false positive toward Bot and rank features by how often
    they enter the top-k."""
    cfg = cfg or LimeConfig()
    if len(fps) == 0:
        raise DataError("no false positives to mine")
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(fps))
    sigma = perturbation_scale(background)
    attributions = []
    for i, rec in enumerate(fps.records):
        sub = LimeConfig(
            cfg.n_samples, cfg.kernel_width, cfg.k, cfg.ridge_alpha,
            int(seeds[i].generate_state(1)[0]), ClassLabel.BOT,
        )
        attributions.append(lime_explain(model, rec, background, sub, scale=sigma))
    return FpMining(feature_frequencies(attributions), attributions)


# -- heavy-user refinement -------------------------------------------------


@dataclass(frozen=True)
class HeavyUserRule:
    """Human records at or above every threshold become HeavyUser."""

    features: tuple[str, ...]
    thresholds: tuple[float, ...]
    percentile: Optional[float] = None

    def __post_init__(self):
        if not self.features:
            raise DataError("heavy-user rule needs at least one feature")
        if len(self.features) != len(self.thresholds):
            raise DataError("one threshold per rule feature")
        if not all(np.isfinite(self.thresholds)):
            raise DataError("rule thresholds must be finite")

    def matches(self, ds: LabeledDataset) -> np.ndarray:
        cols = ds.X[:, ds.schema.indices(self.features)]
        return np.all(cols >= np.asarray(self.thresholds), axis=1)

    def to_dict(self) -> dict:
        return {"features": list(self.features), "thresholds": list(self.thresholds), "percentile": self.percentile}


def derive_heavy_rule(
    ds: LabeledDataset, features: Sequence[str] = DEFAULT_RULE_FEATURES, percentile: float = 90.0
) -> HeavyUserRule:
    """Per-feature percentile thresholds over the Human-labeled records."""
    if not 0 <= percentile <= 100:
        raise DataError("percentile must lie in [0, 100]")
    idx = ds.schema.indices(features)
    humans = ds.X[np.asarray(ds.labels) == ClassLabel.HUMAN]
    if not len(humans):
        raise DataError("no Human records to derive thresholds from", "empty_class")
    thresholds = np.percentile(humans[:, idx], percentile, axis=0)
    return HeavyUserRule(tuple(features), tuple(float(t) for t in thresholds), float(percentile))


def relabel(ds: LabeledDataset, rule: HeavyUserRule) -> LabeledDataset:
    """Turn matching Human records into HeavyUser; Bot labels never change."""
    labels = np.array(ds.labels)
    hit = (labels == ClassLabel.HUMAN) & rule.matches(ds)
    labels[hit] = int(ClassLabel.HEAVY_USER)
    return ds.with_labels(labels)


@dataclass(frozen=True)
class RefinementReport:
    binary: EvalMetrics
    three_class: EvalMetrics
    relabeled_count: int
    rule: HeavyUserRule
    seed: int
    settings: TrainSettings
    degenerate: bool = False

    @property
    def fp_before(self) -> int:
        return self.binary.false_positive_count

    @property
    def fp_after(self) -> int:
        return self.three_class.false_positive_count

    def to_dict(self) -> dict:
        return {
            "experiment": "heavy_user_refinement",
            "seed": self.seed,
            "config": self.settings.to_dict(),
            "rule": self.rule.to_dict(),
            "relabeled_count": self.relabeled_count,
            "degenerate": self.degenerate,
            "baseline": self.binary.to_dict(),
            "treatment": self.three_class.to_dict(),
            "delta": self.three_class.accuracy - self.binary.accuracy,
            "fp_before": self.fp_before,
            "fp_after": self.fp_after,
        }


def three_class_experiment(
    ds: LabeledDataset,
    rule: Optional[HeavyUserRule] = None,
    settings: Optional[TrainSettings] = None,
    seed: int = 0,
    features: Sequence[str] = DEFAULT_RULE_FEATURES,
    percentile: float = 90.0,
) -> RefinementReport:
    """Binary baseline versus a Human/Bot/HeavyUser model on one split.

    The split is drawn once on binary labels and the rule relabels both
    sides, so the two runs are scored on exactly the same records. Without
    an explicit ``rule`` one is derived from the training Humans.
    """
    settings = settings or TrainSettings()
    binary = ds.collapse_heavy()
    train, val = stratified_split(binary, settings.train_fraction, seed)
    if rule is None:
        rule = derive_heavy_rule(train, features, percentile)
    train3, val3 = relabel(train, rule), relabel(val, rule)
    relabeled = int(np.sum(train3.labels == ClassLabel.HEAVY_USER) + np.sum(val3.labels == ClassLabel.HEAVY_USER))
    for part in (train3, val3):
        for label in (ClassLabel.HUMAN, ClassLabel.BOT):
            if not np.any(part.labels == label):
                raise DataError(f"relabeling leaves class {label.token} empty", "empty_class")
    degenerate = relabeled == 0

    base_model = fit(train, settings, seed)
    binary_metrics = evaluate(base_model, val)
    three_model = fit(train3, settings, seed, classes=THREE_CLASSES)
    three_metrics = evaluate(three_model, val3)
    return RefinementReport(binary_metrics, three_metrics, relabeled, rule, seed, settings, degenerate)
