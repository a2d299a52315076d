"""Randomized invariants over the dataset and tree primitives."""

import io
from collections import Counter

import numpy as np
from helpers import toy_dataset
from hypothesis import given, settings
from hypothesis import strategies as st

from botlens.classifiers import gini_impurity
from botlens.dataset import dumps_csv, filter_min_level, read_csv, rebalance, stratified_split
from botlens.synth import GeneratorConfig, generate

SMALL = settings(max_examples=60, deadline=None)


@st.composite
def labeled(draw, min_per_class=2):
    counts = draw(st.lists(st.integers(min_per_class, 30), min_size=2, max_size=3))
    labels = np.repeat(np.arange(len(counts)), counts)
    labels = labels[draw(st.permutations(range(len(labels))))]
    d = draw(st.integers(1, 4))
    X = np.arange(len(labels) * d, dtype=float).reshape(len(labels), d)
    return toy_dataset(X, labels)


@SMALL
@given(labeled(), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_split_is_a_stratified_partition(ds, frac, seed):
    train, val = stratified_split(ds, frac, seed)
    assert sorted(train.ids + val.ids) == sorted(ds.ids)
    assert not set(train.ids) & set(val.ids)
    for code in set(ds.labels.tolist()):
        assert np.any(train.labels == code) and np.any(val.labels == code)


@SMALL
@given(labeled(min_per_class=1), st.sampled_from(["oversample", "undersample"]), st.integers(0, 1000))
def test_rebalance_only_reuses_existing_records(ds, mode, seed):
    out = rebalance(ds, mode, seed)
    counts = Counter(out.labels.tolist())
    assert len(set(counts.values())) == 1
    rows = {tuple(r): int(lab) for r, lab in zip(ds.X, ds.labels)}
    for r, lab in zip(out.X, out.labels):
        assert rows[tuple(r)] == lab
    if mode == "oversample":
        # nothing dropped
        assert set(ds.ids) <= set(out.ids)
        assert all(i.split("~")[0] in ds.ids for i in out.ids)
    else:
        assert set(out.ids) <= set(ds.ids)


@SMALL
@given(st.lists(st.integers(0, 50), min_size=1, max_size=5).filter(lambda c: sum(c) > 0))
def test_gini_bounds(counts):
    g = gini_impurity(counts)
    k = len(counts)
    assert -1e-12 <= g <= 1 - 1 / k + 1e-12
    if max(counts) == sum(counts):
        assert g == 0.0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 30), st.integers(0, 2**16))
def test_level_filter_is_idempotent(level, seed):
    ds = generate(GeneratorConfig(n=120, seed=seed))
    once = filter_min_level(ds, level)
    assert filter_min_level(once, level).ids == once.ids
    assert np.all(once.column("max_level") >= level)


finite = st.floats(0, 1e12, allow_nan=False, allow_infinity=False)


@SMALL
@given(st.integers(1, 8), st.integers(1, 4), st.data())
def test_csv_round_trip(n, d, data):
    X = np.array(data.draw(st.lists(st.lists(finite, min_size=d, max_size=d), min_size=n, max_size=n)))
    labels = np.array(data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n)))
    ds = toy_dataset(X, labels)
    back = read_csv(io.StringIO(dumps_csv(ds)), ds.schema)
    assert back.ids == ds.ids
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(back.labels, ds.labels)
