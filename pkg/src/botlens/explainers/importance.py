"""Global importances: forest impurity decrease and permutation importance."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from botlens.classifiers.metrics import predict
from botlens.errors import DataError
from botlens.explainers.base import GlobalImportance, check_schema
from botlens.parallel import thread_count

log = logging.getLogger(__name__)


def impurity_importance(model) -> GlobalImportance:
    """Mean decrease in Gini impurity, weighted by node sample share.

    Per-tree totals are averaged over the forest and the result normalized
    to sum to one.
    """
    if getattr(model, "kind", None) != "forest":
        raise DataError("impurity importance needs a random forest model")
    d = len(model.schema)
    total = np.zeros(d)
    for tree in model.trees:
        internal = np.flatnonzero(tree.feature >= 0)
        if not internal.size:
            continue
        n = tree.n_samples.astype(float)
        l, r = tree.left[internal], tree.right[internal]
        child = (n[l] * tree.impurity[l] + n[r] * tree.impurity[r]) / n[internal]
        decrease = (n[internal] / n[0]) * (tree.impurity[internal] - child)
        total += np.bincount(tree.feature[internal], weights=decrease, minlength=d)
    total /= len(model.trees)
    s = total.sum()
    if s <= 0:
        log.warning("forest has no informative splits; impurity importances are all zero")
        scores = np.zeros(d)
    else:
        scores = total / s
    return GlobalImportance("impurity", model.schema.names, scores)


def permutation_importance(model, ds, n_repeats: int = 10, seed: int = 0) -> GlobalImportance:
    """Accuracy drop when one column is shuffled, averaged over repeats.

    Every feature draws its shuffles from its own child seed, so results do
    not depend on evaluation order. ``raw`` holds the signed mean drop;
    ``scores`` clips it at zero.
    """
    if n_repeats < 1:
        raise DataError("n_repeats must be >= 1")
    ds.require_labels()
    check_schema(model, ds)
    X = np.array(ds.X)
    y = np.asarray(ds.labels)
    n = len(X)
    base_correct = int(np.sum(predict(model, X) == y))
    baseline = base_correct / n
    d = X.shape[1]
    seeds = np.random.SeedSequence(seed).spawn(d)

    def score(j):
        rng = np.random.default_rng(seeds[j])
        Xp = X.copy()
        correct = 0
        for _ in range(n_repeats):
            Xp[:, j] = X[rng.permutation(n), j]
            correct += int(np.sum(predict(model, Xp) == y))
        # integer tallies keep an unchanged column at exactly zero
        return baseline - correct / (n_repeats * n)

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            raw = np.array(list(pool.map(score, range(d))))
    else:
        raw = np.array([score(j) for j in range(d)])
    return GlobalImportance("permutation", ds.schema.names, np.maximum(raw, 0.0), raw=raw)
