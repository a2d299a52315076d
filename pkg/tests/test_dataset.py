import io
from collections import Counter

import numpy as np
import pytest
from helpers import toy_dataset

from botlens.dataset import (
    LabeledDataset,
    PlayerRecord,
    class_counts,
    dumps_csv,
    filter_min_level,
    load_csv,
    read_csv,
    rebalance,
    save_csv,
    stratified_split,
)
from botlens.errors import DataError
from botlens.schema import CATEGORIES, ClassLabel, FeatureSchema

SCHEMA = FeatureSchema.default()


def test_default_schema_layout():
    assert len(SCHEMA) == 40
    assert SCHEMA.names[0] == "login_count"
    assert SCHEMA.names[5] == "login_day_count"
    assert SCHEMA.names[8] == "collect_max_count"
    assert SCHEMA.names[39] == "social_diversity"
    assert Counter(SCHEMA.categories) == {"player_information": 8, "player_action": 28, "social_activity": 4}
    assert set(SCHEMA.categories) <= set(CATEGORIES)
    for name in ("playtime_per_day", "item_get_count_per_day", "exp_get_ratio", "teleport_count_per_day", "avg_money"):
        assert name in SCHEMA.names


def test_schema_rejects_duplicates_and_empty_names():
    with pytest.raises(DataError):
        FeatureSchema(("a", "a"), ("player_action",) * 2, ("count",) * 2)
    with pytest.raises(DataError):
        FeatureSchema(("",), ("player_action",), ("count",))
    with pytest.raises(DataError):
        FeatureSchema(("a",), ("nonsense",), ("count",))


def test_label_parse_is_case_insensitive():
    assert ClassLabel.parse("BOT") is ClassLabel.BOT
    assert ClassLabel.parse(" Heavy_User ") is ClassLabel.HEAVY_USER
    with pytest.raises(DataError):
        ClassLabel.parse("robot")


def _row(pid, values, label=None):
    cells = [pid, *(str(v) for v in values)]
    if label is not None:
        cells.append(label)
    return ",".join(cells)


def _csv(rows, labeled=True, names=SCHEMA.names):
    header = ",".join(["player_id", *names, *(["label"] if labeled else [])])
    return io.StringIO("\n".join([header, *rows]) + "\n")


def _values(**over):
    v = [1.0] * 40
    for k, x in over.items():
        v[SCHEMA.index(k)] = x
    return v


def test_three_row_file_parses():
    rows = [_row(f"p{i}", _values(), lab) for i, lab in enumerate(["human", "bot", "Human"])]
    ds = read_csv(_csv(rows), SCHEMA)
    assert len(ds) == 3
    assert list(ds.labels) == [0, 1, 0]
    assert ds.ids == ("p0", "p1", "p2")


def test_unlabeled_file_and_empty_label_cell():
    ds = read_csv(_csv([_row("a", _values())], labeled=False), SCHEMA)
    assert not ds.is_labeled
    ds = read_csv(_csv([_row("a", _values(), "")]), SCHEMA)
    assert ds.labels[0] == -1
    with pytest.raises(DataError) as e:
        class_counts(ds)
    assert e.value.code == "unlabeled"


@pytest.mark.parametrize(
    "rows, names, code",
    [
        ([_row("a", _values()[:39], "bot")], SCHEMA.names[:39], "schema_mismatch"),
        ([_row("a", ["x"] + _values()[1:], "bot")], SCHEMA.names, "non_numeric"),
        ([_row("a", ["nan"] + _values()[1:], "bot")], SCHEMA.names, "non_numeric"),
        ([_row("a", _values(), "bot"), _row("a", _values(), "bot")], SCHEMA.names, "duplicate_id"),
        ([_row("a", _values(exp_get_ratio=1.5), "bot")], SCHEMA.names, "out_of_range"),
        ([_row("a", _values(login_count=-1), "bot")], SCHEMA.names, "out_of_range"),
        ([_row("a", _values(), "robot")], SCHEMA.names, "bad_label"),
        ([_row("a", [""] + _values()[1:], "bot")], SCHEMA.names, "missing_value"),
        ([_row("a", _values(), "bot") + ",extra"], SCHEMA.names, "schema_mismatch"),
    ],
)
def test_invalid_rows_raise_documented_codes(rows, names, code):
    with pytest.raises(DataError) as e:
        read_csv(_csv(rows, names=names), SCHEMA)
    assert e.value.code == code


def test_error_message_names_line():
    rows = [_row("a", _values(), "bot"), _row("b", ["oops"] + _values()[1:], "bot")]
    with pytest.raises(DataError, match="line 3"):
        read_csv(_csv(rows), SCHEMA)


def test_missing_file(tmp_path):
    with pytest.raises(DataError) as e:
        load_csv(tmp_path / "absent.csv")
    assert e.value.code == "missing_file"


def test_csv_round_trip_is_value_identical(tmp_path, small_three):
    path = tmp_path / "d.csv"
    save_csv(small_three, path)
    back = load_csv(path)
    assert back.ids == small_three.ids
    assert np.array_equal(back.X, small_three.X)
    assert np.array_equal(back.labels, small_three.labels)
    assert dumps_csv(back) == path.read_text()


def test_dataset_is_immutable_and_validated():
    ds = toy_dataset([[1.0, 2.0]], [0])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 5
    with pytest.raises(DataError) as e:
        LabeledDataset(ds.schema, ("a", "a"), np.ones((2, 2)), [0, 0])
    assert e.value.code == "duplicate_id"
    with pytest.raises(DataError):
        toy_dataset([[np.inf, 1.0]])


def test_records_round_trip():
    ds = toy_dataset([[1.0, 2.0], [3.0, 4.0]], [0, 1])
    recs = list(ds.records)
    assert isinstance(recs[1], PlayerRecord)
    assert recs[1].player_id == "r1" and recs[1].label == ClassLabel.BOT
    assert recs[1].features.tolist() == [3.0, 4.0]
    again = LabeledDataset.from_records(ds.schema, recs)
    assert np.array_equal(again.X, ds.X) and np.array_equal(again.labels, ds.labels)


def _leveled(levels):
    X = np.ones((len(levels), 40))
    X[:, SCHEMA.index("max_level")] = levels
    return LabeledDataset(SCHEMA, tuple(f"p{i}" for i in range(len(levels))), X, np.zeros(len(levels)))


def test_filter_min_level_boundary_and_idempotence():
    ds = _leveled([4, 5])
    out = filter_min_level(ds, 5)
    assert out.ids == ("p1",)
    assert len(filter_min_level(ds, 0)) == 2
    ten = _leveled([1, 2, 3, 5, 6, 7, 8, 9, 10, 11])
    once = filter_min_level(ten)
    assert len(once) == 7
    assert filter_min_level(once).ids == once.ids
    assert len(ten) == 10  # input untouched
    with pytest.raises(DataError):
        filter_min_level(toy_dataset([[1.0]], [0]))


def test_stratified_split_counts():
    labels = np.array([1] * 100 + [0] * 900)
    ds = toy_dataset(np.arange(1000.0)[:, None], labels)
    train, val = stratified_split(ds, 0.9, seed=1)
    assert (len(train), int(np.sum(train.labels == 1))) == (900, 90)
    assert (len(val), int(np.sum(val.labels == 1))) == (100, 10)
    assert sorted(train.ids + val.ids) == sorted(ds.ids)
    again = stratified_split(ds, 0.9, seed=1)
    assert again[0].ids == train.ids


def test_stratified_split_small_classes():
    ds = toy_dataset([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1])
    train, val = stratified_split(ds, 0.5, seed=0)
    assert class_counts(train) == class_counts(val) == {ClassLabel.HUMAN: 1, ClassLabel.BOT: 1}
    with pytest.raises(DataError) as e:
        stratified_split(toy_dataset([[0.0], [1.0]], [0, 1]), 0.5, 0)
    assert e.value.code == "class_too_small"
    with pytest.raises(DataError):
        stratified_split(ds, 1.0, 0)


def test_rebalance_oversample_reference_counts():
    # counts only; one feature keeps the matrix small
    labels = np.array([0] * 43317 + [1] * 6213)
    ds = toy_dataset(np.zeros((len(labels), 1)), labels)
    out = rebalance(ds, "oversample", seed=0)
    assert class_counts(out) == {ClassLabel.HUMAN: 43317, ClassLabel.BOT: 43317}
    assert set(ds.ids) <= set(out.ids)
    assert len(set(out.ids)) == len(out)


def test_rebalance_undersample_and_fixed_point():
    labels = np.array([0] * 90 + [1] * 10)
    ds = toy_dataset(np.arange(100.0)[:, None], labels)
    out = rebalance(ds, "undersample", seed=0)
    assert class_counts(out) == {ClassLabel.HUMAN: 10, ClassLabel.BOT: 10}
    assert set(out.ids) <= set(ds.ids)
    balanced = toy_dataset(np.arange(4.0)[:, None], [0, 1, 0, 1])
    for mode in ("oversample", "undersample"):
        same = rebalance(balanced, mode, seed=3)
        assert sorted(same.ids) == sorted(balanced.ids)
    with pytest.raises(DataError):
        rebalance(toy_dataset([[0.0], [1.0]], [0, 0]), "oversample", 0)


def test_class_counts_small_cases():
    assert class_counts(toy_dataset(np.zeros((0, 1)), np.zeros(0))) == {}
    ds = toy_dataset(np.zeros((10, 1)), [0, 1] * 5)
    assert class_counts(ds) == {ClassLabel.HUMAN: 5, ClassLabel.BOT: 5}


def test_drop_features_and_collapse():
    ds = toy_dataset([[1.0, 2.0, 3.0]], [2])
    dropped = ds.drop_features(["f1"])
    assert dropped.schema.names == ("f0", "f2")
    assert dropped.X.tolist() == [[1.0, 3.0]]
    assert ds.collapse_heavy().labels.tolist() == [0]
