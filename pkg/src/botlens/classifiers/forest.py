"""Random forest of Gini-split decision trees, built from scratch on numpy."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from botlens.errors import DataError
from botlens.parallel import thread_count
from botlens.schema import ClassLabel, FeatureSchema

LEAF = -1


def gini_impurity(class_counts) -> float:
    """``1 - sum(p_c ** 2)`` for a vector of class counts."""
    counts = np.asarray(class_counts, dtype=float)
    if np.any(counts < 0):
        raise DataError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise DataError("gini impurity of an empty node is undefined")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass(frozen=True)
class Tree:
    """Flat array encoding of one fitted tree.

    Node ``i`` is a leaf when ``feature[i] == -1``; otherwise samples with
    ``x[feature] <= threshold`` go to ``left[i]`` and the rest to ``right[i]``.
    ``value`` holds the class distribution of every node (leaf or not),
    ``n_samples`` and ``impurity`` the training statistics that feed the
    impurity importance.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=int)
        for i in range(self.node_count):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = rows
        while active.size:
            n = node[active]
            f = self.feature[n]
            internal = f != LEAF
            active, n, f = active[internal], n[internal], f[internal]
            if not active.size:
                break
            go_left = X[active, f] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass(frozen=True)
class ForestParams:
    tree_count: int = 100
    max_depth: Optional[int] = None
    min_leaf_size: int = 2
    features_per_split: Optional[int] = None  # None -> floor(sqrt(d))
    bootstrap: bool = True

    def __post_init__(self):
        if self.tree_count < 1:
            raise DataError("tree_count must be >= 1")
        if self.min_leaf_size < 1:
            raise DataError("min_leaf_size must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError("max_depth must be >= 0")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise DataError("features_per_split must be >= 1")


@dataclass(frozen=True, eq=False)
class RandomForestModel:
    trees: tuple[Tree, ...]
    params: ForestParams
    schema: FeatureSchema
    classes: tuple[ClassLabel, ...]
    seed: int
    kind: str = field(default="forest", init=False)

    def predict_proba(self, X) -> np.ndarray:
        X = _as_matrix(X, len(self.schema))
        out = np.zeros((X.shape[0], len(self.classes)))
        for tree in self.trees:
            out += tree.predict_proba(X)
        return out / len(self.trees)


def _as_matrix(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise DataError(f"expected {d} features per record, got shape {X.shape}", "schema_mismatch")
    return X


def _best_split(Xn: np.ndarray, yn: np.ndarray, n_classes: int, features: np.ndarray, min_leaf: int):
    """Lowest weighted child impurity over all midpoints of ``features``.

    Returns ``(score, feature, threshold)`` or None when no candidate feature
    admits a split leaving ``min_leaf`` samples on both sides.
    """
    n = Xn.shape[0]
    cols = np.ascontiguousarray(Xn[:, features].T)  # (m, n)
    order = np.argsort(cols, axis=1)
    xs = np.take_along_axis(cols, order, axis=1)
    ys = yn[order]
    n_left = np.arange(1, n, dtype=float)[None, :]
    n_right = n - n_left
    # weighted child impurity = 1 - (sum_c L_c^2 / n_l + sum_c R_c^2 / n_r) / n
    # tie order inside equal x values is irrelevant: only cuts between
    # distinct values are scored
    sq_left = np.zeros((len(features), n - 1))
    sq_right = np.zeros_like(sq_left)
    for c in range(n_classes):
        hit = ys == c
        total = hit[0].sum()
        if total == 0:
            continue
        cl = np.cumsum(hit, axis=1)[:, :-1]
        cr = total - cl
        sq_left += cl * cl
        sq_right += cr * cr
    gain = sq_left / n_left + sq_right / n_right
    valid = xs[:, :-1] < xs[:, 1:]
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    j, pos = divmod(flat, n - 1)
    lo, hi = xs[j, pos], xs[j, pos + 1]
    threshold = 0.5 * (lo + hi)
    # guard against midpoint rounding onto the right-hand value
    if threshold >= hi:
        threshold = lo
    return float(1.0 - gain[j, pos] / n), int(features[j]), float(threshold)


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    rng: np.random.Generator,
    max_depth: Optional[int] = None,
    min_leaf_size: int = 1,
    features_per_split: Optional[int] = None,
) -> Tree:
    """Grow one CART classification tree.

    At every node a uniform sample of ``features_per_split`` features is
    searched; if none of them admits a valid split the remaining features
    are tried in random order before the node is made a leaf.
    """
    n, d = X.shape
    m = d if features_per_split is None else min(features_per_split, d)
    feature, threshold, left, right, value, n_samples, impurity = [], [], [], [], [], [], []

    def new_node(idx):
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(counts / counts.sum())
        n_samples.append(len(idx))
        impurity.append(gini_impurity(counts))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if impurity[node] <= 0.0 or len(idx) < 2 * min_leaf_size:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        Xn, yn = X[idx], y[idx]
        perm = rng.permutation(d)
        split = None
        for start in range(0, d, m):
            split = _best_split(Xn, yn, n_classes, perm[start : start + m], min_leaf_size)
            if split is not None:
                break
        if split is None:
            continue
        _, f, t = split
        go_left = Xn[:, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, t
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=float).reshape(len(feature), n_classes),
        np.array(n_samples, dtype=np.int64),
        np.array(impurity, dtype=float),
    )


def train_random_forest(train, params: Optional[ForestParams] = None, seed: int = 0, classes=None):
    """Fit a forest on a labeled dataset.

    Each tree gets its own child seed spawned from ``seed``, so the result
    does not depend on how many worker threads build the trees.
    """
    params = params or ForestParams()
    train.require_labels()
    if len(train) == 0:
        raise DataError("cannot train on an empty dataset")
    classes = tuple(classes) if classes is not None else _infer_classes(train.labels)
    index = {int(c): k for k, c in enumerate(classes)}
    try:
        y = np.array([index[int(c)] for c in train.labels], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"label {exc} not among model classes") from None
    d = len(train.schema)
    m = params.features_per_split or max(1, math.isqrt(d))
    X = np.asarray(train.X)
    seeds = np.random.SeedSequence(seed).spawn(params.tree_count)

    def build(ss):
        rng = np.random.default_rng(ss)
        if params.bootstrap:
            rows = rng.integers(0, len(X), size=len(X))
        else:
            rows = np.arange(len(X))
        return fit_tree(X[rows], y[rows], len(classes), rng, params.max_depth, params.min_leaf_size, m)

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trees = tuple(pool.map(build, seeds))
    else:
        trees = tuple(build(ss) for ss in seeds)
    return RandomForestModel(trees, params, train.schema, classes, seed)


def _infer_classes(labels) -> tuple[ClassLabel, ...]:
    present = {int(c) for c in labels}
    if present <= {int(ClassLabel.HUMAN), int(ClassLabel.BOT)}:
        return (ClassLabel.HUMAN, ClassLabel.BOT)
    return tuple(ClassLabel(c) for c in sorted(present | {0, 1}))
