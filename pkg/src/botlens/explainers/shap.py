"""KernelSHAP: Shapley values by kernel-weighted regression over coalitions.

Absent features are filled in from background records (interventional
expectation). Up to ``EXHAUSTIVE_MAX_D`` features, or whenever the budget
covers all ``2**d - 2`` proper coalitions, every coalition is enumerated and
the result equals the exact Shapley values of the game. Otherwise small
coalition sizes and their complements are enumerated while the budget
allows and the remaining sizes are sampled in complementary pairs.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from botlens.errors import DataError, NumericalError
from botlens.explainers.base import (
    FeatureAttribution,
    GlobalImportance,
    check_schema,
    class_probability,
    target_index,
)
from botlens.parallel import thread_count
from botlens.schema import ClassLabel

_CHUNK_ROWS = 200_000
EXHAUSTIVE_MAX_D = 12


@dataclass(frozen=True)
class ShapConfig:
    n_coalitions: int = 2048
    background_size: int = 100
    seed: int = 0
    target_class: ClassLabel = ClassLabel.BOT

    def __post_init__(self):
        if self.n_coalitions < 1:
            raise DataError("n_coalitions must be positive")
        if self.background_size < 1:
            raise DataError("background_size must be positive")


def shapley_kernel(d: int, size: int) -> float:
    """Weight of one coalition of ``size`` present features out of ``d``."""
    return (d - 1) / (math.comb(d, size) * size * (d - size))


def sample_coalitions(d: int, budget: int, rng: np.random.Generator):
    """Coalition masks and regression weights (empty/full excluded).

    Returns ``(masks, weights)`` with masks of shape ``(m, d)``.
    """
    if d < 2:
        return np.ones((0, d), dtype=bool), np.zeros(0)
    if d <= EXHAUSTIVE_MAX_D or 2**d - 2 <= budget:
        masks, weights = [], []
        for s in range(1, d):
            w = shapley_kernel(d, s)
            for combo in combinations(range(d), s):
                z = np.zeros(d, dtype=bool)
                z[list(combo)] = True
                masks.append(z)
                weights.append(w)
        return np.array(masks), np.array(weights)

    n_sizes = d // 2  # sizes 1..n_sizes paired with d - size
    size_mass = np.array([(d - 1) / (s * (d - s)) for s in range(1, n_sizes + 1)])
    paired = np.array([s != d - s for s in range(1, n_sizes + 1)])
    size_mass[paired] *= 2
    size_mass /= size_mass.sum()

    masks, weights = [], []
    remaining = budget
    first_open = 0
    mass_left = size_mass.copy()
    for i in range(n_sizes):
        s = i + 1
        count = math.comb(d, s) * (2 if paired[i] else 1)
        share = remaining * mass_left[i] / mass_left[i:].sum()
        if share + 1e-8 < count:
            break
        per_subset = size_mass[i] / count
        for combo in combinations(range(d), s):
            z = np.zeros(d, dtype=bool)
            z[list(combo)] = True
            masks.append(z)
            weights.append(per_subset)
            if paired[i]:
                masks.append(~z)
                weights.append(per_subset)
        remaining -= count
        first_open = i + 1

    open_sizes = np.arange(first_open, n_sizes)
    if open_sizes.size and remaining >= 2:
        probs = size_mass[open_sizes] / size_mass[open_sizes].sum()
        open_mass = size_mass[open_sizes].sum()
        counts: dict[bytes, list] = {}
        drawn = 0
        while drawn + 2 <= remaining:
            s = int(open_sizes[rng.choice(len(open_sizes), p=probs)]) + 1
            z = np.zeros(d, dtype=bool)
            z[rng.choice(d, size=s, replace=False)] = True
            for mask in (z, ~z):
                key = mask.tobytes()
                if key in counts:
                    counts[key][1] += 1
                else:
                    counts[key] = [mask, 1]
            drawn += 2
        total = sum(c for _, c in counts.values())
        for mask, c in counts.values():
            masks.append(mask)
            weights.append(open_mass * c / total)
    if not masks:
        return np.ones((0, d), dtype=bool), np.zeros(0)
    return np.array(masks), np.array(weights)


def coalition_values(f, x: np.ndarray, background: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """``E_b f(x_S, b_notS)`` for every mask row."""
    nb, d = background.shape
    out = np.empty(len(masks))
    per_chunk = max(1, _CHUNK_ROWS // nb)
    for start in range(0, len(masks), per_chunk):
        block = masks[start : start + per_chunk]
        rows = np.where(block[:, None, :], x[None, None, :], background[None, :, :])
        vals = f(rows.reshape(-1, d))
        out[start : start + len(block)] = vals.reshape(len(block), nb).mean(axis=1)
    return out


def solve_shapley(masks, weights, values, base: float, fx: float) -> np.ndarray:
    """Weighted least squares with ``sum(phi) == fx - base`` enforced by
    eliminating the last feature."""
    m, d = masks.shape
    if d == 1:
        return np.array([fx - base])
    distinct = len({row.tobytes() for row in masks})
    if distinct + 2 < d + 1:
        raise NumericalError(f"only {distinct} distinct coalitions for {d} features")
    Z = masks.astype(float)
    target = values - base - Z[:, -1] * (fx - base)
    A = Z[:, :-1] - Z[:, -1:]
    sw = np.sqrt(weights)
    Aw = A * sw[:, None]
    if np.linalg.matrix_rank(Aw) < d - 1:
        raise NumericalError("coalition design matrix is singular")
    head, *_ = np.linalg.lstsq(Aw, target * sw, rcond=None)
    return np.append(head, (fx - base) - head.sum())


def kernel_shap(model, instance, background, cfg: Optional[ShapConfig] = None) -> FeatureAttribution:
    cfg = cfg or ShapConfig()
    check_schema(model, background)
    if len(background) == 0:
        raise DataError("KernelSHAP needs a non-empty background")
    x = np.asarray(getattr(instance, "features", instance), dtype=float)
    d = len(model.schema)
    if x.shape != (d,):
        raise DataError(f"instance has {x.shape} features, expected {d}", "schema_mismatch")
    if cfg.n_coalitions < d + 2:
        raise DataError(f"n_coalitions={cfg.n_coalitions} is below d + 2 = {d + 2}")
    col = target_index(model, cfg.target_class)
    rng = np.random.default_rng(cfg.seed)
    bg = np.asarray(background.X)
    if len(bg) > cfg.background_size:
        bg = bg[np.sort(rng.choice(len(bg), size=cfg.background_size, replace=False))]

    def f(rows):
        return class_probability(model, rows, col)

    prediction = float(f(x[None, :])[0])
    masks, weights = sample_coalitions(d, cfg.n_coalitions, rng)
    # empty and full coalitions go through the same averaging as the rest,
    # so a model that ignores its input gets exactly zero attributions
    ends = coalition_values(f, x, bg, np.array([np.zeros(d, bool), np.ones(d, bool)]))
    base, fx = float(ends[0]), float(ends[1])
    values = coalition_values(f, x, bg, masks)
    phi = solve_shapley(masks, weights, values, base, fx)
    return FeatureAttribution(
        method="shap",
        instance_id=getattr(instance, "player_id", None),
        target_class=ClassLabel(cfg.target_class),
        feature_names=model.schema.names,
        weights=phi,
        base_value=base,
        prediction=prediction,
    )


def shap_global(model, ds_sample, background, cfg: Optional[ShapConfig] = None) -> GlobalImportance:
    """Mean absolute SHAP value per feature over ``ds_sample``."""
    cfg = cfg or ShapConfig()
    if len(ds_sample) == 0:
        raise DataError("SHAP summary needs a non-empty sample")
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(ds_sample))

    def explain(i):
        sub = ShapConfig(cfg.n_coalitions, cfg.background_size, int(seeds[i].generate_state(1)[0]), cfg.target_class)
        return kernel_shap(model, ds_sample.record(i), background, sub)

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            attributions = list(pool.map(explain, range(len(ds_sample))))
    else:
        attributions = [explain(i) for i in range(len(ds_sample))]
    scores = np.mean(np.abs([a.weights for a in attributions]), axis=0)
    return GlobalImportance("shap", model.schema.names, scores, attributions=tuple(attributions))
