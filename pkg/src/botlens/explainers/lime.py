"""Local linear surrogates (LIME) and submodular instance picking (SP-LIME)."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from botlens.errors import DataError
from botlens.explainers.base import (
    FeatureAttribution,
    GlobalImportance,
    check_schema,
    class_probability,
    rank_desc,
    target_index,
)
from botlens.parallel import thread_count
from botlens.schema import ClassLabel


@dataclass(frozen=True)
class LimeConfig:
    n_samples: int = 5000
    kernel_width: Optional[float] = None  # None -> 0.75 * sqrt(d)
    k: int = 10
    ridge_alpha: float = 1.0
    seed: int = 0
    target_class: ClassLabel = ClassLabel.BOT

    def __post_init__(self):
        if self.n_samples < 100:
            raise DataError("LIME needs n_samples >= 100")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise DataError("kernel_width must be positive")
        if self.k < 1:
            raise DataError("k must be >= 1")
        if self.ridge_alpha < 0:
            raise DataError("ridge_alpha must be non-negative")

    def width(self, d: int) -> float:
        return self.kernel_width if self.kernel_width is not None else 0.75 * math.sqrt(d)


def perturbation_scale(background) -> np.ndarray:
    return np.asarray(background.X).std(axis=0)


def weighted_ridge(Z: np.ndarray, y: np.ndarray, w: np.ndarray, alpha: float):
    """Minimize ``sum w (y - b - Z beta)^2 + alpha |beta|^2`` with free intercept."""
    sw = w.sum()
    z_mean = w @ Z / sw
    y_mean = w @ y / sw
    Zc = Z - z_mean
    yc = y - y_mean
    A = Zc.T @ (Zc * w[:, None]) + alpha * np.eye(Z.shape[1])
    beta = np.linalg.solve(A, Zc.T @ (w * yc))
    return beta, float(y_mean - z_mean @ beta)


def lime_explain(model, instance, background, cfg: Optional[LimeConfig] = None, scale=None) -> FeatureAttribution:
    """Explain ``model``'s target-class probability around one record.

    Perturbations are ``x + z * sigma`` with ``z ~ N(0, I)`` and ``sigma``
    the background per-feature standard deviation. Coefficients are per
    standard deviation of each feature; features with zero spread are never
    perturbed and get a zero coefficient.
    """
    cfg = cfg or LimeConfig()
    check_schema(model, background)
    x = np.asarray(getattr(instance, "features", instance), dtype=float)
    d = len(model.schema)
    if x.shape != (d,):
        raise DataError(f"instance has {x.shape} features, expected {d}", "schema_mismatch")
    col = target_index(model, cfg.target_class)
    sigma = perturbation_scale(background) if scale is None else np.asarray(scale, dtype=float)
    active = np.flatnonzero(sigma > 0)

    rng = np.random.default_rng(cfg.seed)
    Z = rng.standard_normal((cfg.n_samples, d))
    Z[0] = 0.0  # the instance itself
    Z[:, sigma <= 0] = 0.0
    X = x + Z * sigma
    y = class_probability(model, X, col)
    dist2 = np.sum(Z * Z, axis=1)
    w = np.exp(-dist2 / cfg.width(d) ** 2)

    coef = np.zeros(d)
    if active.size:
        beta, intercept = weighted_ridge(Z[:, active], y, w, cfg.ridge_alpha)
        coef[active] = beta
    else:
        intercept = float(y[0])
    fitted = intercept + Z @ coef
    resid = y - fitted
    ybar = w @ y / w.sum()
    ss_tot = float(w @ (y - ybar) ** 2)
    r2 = 1.0 - float(w @ resid**2) / ss_tot if ss_tot > 0 else 1.0

    k = min(cfg.k, d)
    selected = tuple(int(i) for i in rank_desc(np.abs(coef))[:k])
    weights = np.zeros(d)
    weights[list(selected)] = coef[list(selected)]
    return FeatureAttribution(
        method="lime",
        instance_id=getattr(instance, "player_id", None),
        target_class=ClassLabel(cfg.target_class),
        feature_names=model.schema.names,
        weights=weights,
        base_value=intercept,
        prediction=float(y[0]),
        selected=selected,
        score=r2,
    )


@dataclass(frozen=True, eq=False)
class SpLimeResult:
    picks: list  # [(PlayerRecord, FeatureAttribution)] in pick order
    coverage: list[float]  # coverage after each pick
    candidates: list  # every candidate FeatureAttribution
    importance: GlobalImportance  # sqrt of summed |weight| over candidates


def coverage(W: np.ndarray, importance: np.ndarray, chosen) -> float:
    """Total importance of features touched by any chosen explanation."""
    if not len(chosen):
        return 0.0
    covered = np.any(W[list(chosen)] > 0, axis=0)
    return float(importance[covered].sum())


def submodular_pick(W: np.ndarray, budget: int) -> tuple[list[int], list[float], np.ndarray]:
    """Greedy maximum-coverage selection over an ``|attribution|`` matrix."""
    W = np.abs(np.asarray(W, dtype=float))
    importance = np.sqrt(W.sum(axis=0))
    chosen, trace = [], []
    covered = np.zeros(W.shape[1], dtype=bool)
    hit = W > 0
    for _ in range(min(budget, W.shape[0])):
        gains = (hit & ~covered) @ importance
        gains[chosen] = -np.inf
        best = int(np.argmax(gains))
        chosen.append(best)
        covered |= hit[best]
        trace.append(float(importance[covered].sum()))
    return chosen, trace, importance


def sp_lime(
    model,
    ds,
    budget: int = 5,
    cfg: Optional[LimeConfig] = None,
    n_candidates: int = 500,
    background=None,
) -> SpLimeResult:
    """Explain a candidate sample with LIME and greedily pick ``budget``
    instances that cover the most globally important features."""
    cfg = cfg or LimeConfig()
    if budget < 1:
        raise DataError("budget must be >= 1")
    if len(ds) == 0:
        raise DataError("SP-LIME needs a non-empty dataset")
    background = background if background is not None else ds
    check_schema(model, ds)
    rng = np.random.default_rng(cfg.seed)
    m = min(len(ds), n_candidates)
    cand = np.sort(rng.choice(len(ds), size=m, replace=False))
    seeds = np.random.SeedSequence(cfg.seed).spawn(m)
    sigma = perturbation_scale(background)

    def explain(i):
        sub = LimeConfig(
            cfg.n_samples, cfg.kernel_width, cfg.k, cfg.ridge_alpha,
            int(seeds[i].generate_state(1)[0]), cfg.target_class,
        )
        return lime_explain(model, ds.record(int(cand[i])), background, sub, scale=sigma)

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            attributions = list(pool.map(explain, range(m)))
    else:
        attributions = [explain(i) for i in range(m)]
    W = np.abs(np.array([a.weights for a in attributions]))
    chosen, trace, importance = submodular_pick(W, budget)
    picks = [(ds.record(int(cand[i])), attributions[i]) for i in chosen]
    glob = GlobalImportance("splime", model.schema.names, importance, attributions=tuple(attributions))
    return SpLimeResult(picks, trace, attributions, glob)
