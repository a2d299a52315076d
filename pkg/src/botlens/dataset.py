"""Labeled player datasets: CSV ingestion, filtering, splitting, rebalancing."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from botlens.errors import DataError
from botlens.schema import ClassLabel, FeatureSchema

UNLABELED = -1


@dataclass(frozen=True)
class PlayerRecord:
    player_id: str
    features: np.ndarray
    label: Optional[ClassLabel] = None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Immutable feature table.

    ``X`` has one row per player aligned to ``schema``; ``labels`` holds
    :class:`ClassLabel` codes with ``-1`` for unlabeled rows. Both arrays are
    read-only copies, so a dataset can be shared freely between readers.
    """

    schema: FeatureSchema
    ids: tuple[str, ...]
    X: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            X = X.reshape(len(self.ids), len(self.schema))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if X.shape != (len(self.ids), len(self.schema)):
            raise DataError(
                f"feature matrix shape {X.shape} does not match "
                f"{len(self.ids)} records x {len(self.schema)} features",
                "schema_mismatch",
            )
        if labels.shape[0] != len(self.ids):
            raise DataError("label count differs from record count", "schema_mismatch")
        if len(set(self.ids)) != len(self.ids):
            dup = next(k for k, v in Counter(self.ids).items() if v > 1)
            raise DataError(f"duplicate player_id {dup!r}", "duplicate_id")
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite feature value", "non_numeric")
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_records(cls, schema: FeatureSchema, records, meta=None) -> "LabeledDataset":
        records = list(records)
        X = np.array([r.features for r in records], dtype=float).reshape(len(records), len(schema))
        labels = [UNLABELED if r.label is None else int(r.label) for r in records]
        return cls(schema, tuple(r.player_id for r in records), X, np.array(labels), dict(meta or {}))

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def records(self) -> Iterator[PlayerRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> PlayerRecord:
        code = int(self.labels[i])
        return PlayerRecord(self.ids[i], self.X[i], None if code == UNLABELED else ClassLabel(code))

    @property
    def is_labeled(self) -> bool:
        return bool(np.all(self.labels != UNLABELED))

    def require_labels(self) -> None:
        if not self.is_labeled:
            raise DataError("dataset contains unlabeled records", "unlabeled")

    def take(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.schema, tuple(self.ids[i] for i in idx), self.X[idx], self.labels[idx], dict(self.meta)
        )

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.schema, self.ids, self.X, np.asarray(labels), dict(self.meta))

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.schema.index(name)]

    def drop_features(self, names) -> "LabeledDataset":
        schema = self.schema.without(names)
        keep = self.schema.indices(schema.names)
        return LabeledDataset(schema, self.ids, self.X[:, keep], self.labels, dict(self.meta))

    def collapse_heavy(self) -> "LabeledDataset":
        """Fold HeavyUser labels into Human (binary-mode view)."""
        labels = np.where(self.labels == ClassLabel.HEAVY_USER, int(ClassLabel.HUMAN), self.labels)
        return self.with_labels(labels)


def concat(parts) -> LabeledDataset:
    parts = list(parts)
    if not parts:
        raise DataError("nothing to concatenate")
    schema = parts[0].schema
    for p in parts[1:]:
        if p.schema != schema:
            raise DataError("cannot concatenate datasets with different schemas", "schema_mismatch")
    return LabeledDataset(
        schema,
        tuple(i for p in parts for i in p.ids),
        np.vstack([p.X for p in parts]),
        np.concatenate([p.labels for p in parts]),
        dict(parts[0].meta),
    )


# -- CSV ------------------------------------------------------------------


def _check_ranges(schema: FeatureSchema, values: np.ndarray, where: str) -> None:
    for j, kind in enumerate(schema.kinds):
        v = values[j]
        if kind == "ratio" and not (0.0 <= v <= 1.0):
            raise DataError(f"{where}: ratio {schema.names[j]}={v} outside [0, 1]", "out_of_range")
        if kind != "ratio" and v < 0:
            raise DataError(f"{where}: {schema.names[j]}={v} is negative", "out_of_range")


def read_csv(stream, schema: FeatureSchema) -> LabeledDataset:
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty file: header row missing", "schema_mismatch") from None
    expected = ["player_id", *schema.names]
    has_label = header == [*expected, "label"]
    if header != expected and not has_label:
        missing = [n for n in expected if n not in header]
        extra = [n for n in header if n not in expected and n != "label"]
        raise DataError(
            f"header does not match schema (missing={missing}, unexpected={extra})", "schema_mismatch"
        )
    width = len(header)
    ids, rows, labels = [], [], []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        where = f"line {lineno}"
        if len(row) != width:
            raise DataError(f"{where}: expected {width} cells, got {len(row)}", "schema_mismatch")
        pid = row[0].strip()
        if not pid:
            raise DataError(f"{where}: empty player_id", "missing_value")
        if pid in seen:
            raise DataError(f"{where}: duplicate player_id {pid!r}", "duplicate_id")
        seen.add(pid)
        cells = row[1 : 1 + len(schema)]
        values = np.empty(len(schema))
        for j, cell in enumerate(cells):
            if not cell.strip():
                raise DataError(f"{where}: missing value for {schema.names[j]}", "missing_value")
            try:
                values[j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{where}: non-numeric value {cell!r} for {schema.names[j]}", "non_numeric"
                ) from None
            if not math.isfinite(values[j]):
                raise DataError(f"{where}: non-finite value for {schema.names[j]}", "non_numeric")
        _check_ranges(schema, values, where)
        label = UNLABELED
        if has_label and row[-1].strip():
            try:
                label = int(ClassLabel.parse(row[-1]))
            except DataError as exc:
                raise DataError(f"{where}: {exc}", "bad_label") from None
        ids.append(pid)
        rows.append(values)
        labels.append(label)
    X = np.array(rows).reshape(len(rows), len(schema))
    return LabeledDataset(schema, tuple(ids), X, np.array(labels, dtype=np.int64))


def load_csv(path, schema: Optional[FeatureSchema] = None) -> LabeledDataset:
    schema = schema or FeatureSchema.default()
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}", "missing_file")
    with path.open(newline="", encoding="utf-8") as fh:
        return read_csv(fh, schema)


def format_value(v: float) -> str:
    # shortest round-tripping decimal, never scientific notation
    return np.format_float_positional(float(v), unique=True, trim="0")


def dumps_csv(ds: LabeledDataset, include_labels: Optional[bool] = None) -> str:
    if include_labels is None:
        include_labels = bool(np.any(ds.labels != UNLABELED))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["player_id", *ds.schema.names, *(["label"] if include_labels else [])])
    for i, pid in enumerate(ds.ids):
        row = [pid, *(format_value(v) for v in ds.X[i])]
        if include_labels:
            code = int(ds.labels[i])
            row.append("" if code == UNLABELED else ClassLabel(code).token)
        w.writerow(row)
    return buf.getvalue()


def save_csv(ds: LabeledDataset, path, include_labels: Optional[bool] = None) -> None:
    Path(path).write_text(dumps_csv(ds, include_labels), encoding="utf-8")


# -- operations ------------------------------------------------------------


def class_counts(ds: LabeledDataset) -> dict[ClassLabel, int]:
    ds.require_labels()
    counts = Counter(int(c) for c in ds.labels)
    return {ClassLabel(c): n for c, n in sorted(counts.items())}


def filter_min_level(ds: LabeledDataset, min_level: int = 5) -> LabeledDataset:
    if "max_level" not in ds.schema.names:
        raise DataError("schema lacks max_level", "schema_mismatch")
    keep = np.flatnonzero(ds.column("max_level") >= min_level)
    return ds.take(keep)


def stratified_split(
    ds: LabeledDataset, train_fraction: float = 0.9, seed: int = 0
) -> tuple[LabeledDataset, LabeledDataset]:
    """Split each class separately so both sides keep the class mix.

    Per class, ``round(train_fraction * n)`` records (half rounded up,
    clamped so both sides get at least one) go to the training side.
    Both outputs keep the input's record order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    ds.require_labels()
    rng = np.random.default_rng(seed)
    train_idx = []
    for code, n in sorted(Counter(int(c) for c in ds.labels).items()):
        if n < 2:
            raise DataError(
                f"class {ClassLabel(code).token} has {n} record(s); stratified split needs 2",
                "class_too_small",
            )
        members = np.flatnonzero(ds.labels == code)
        n_train = min(max(math.floor(train_fraction * n + 0.5), 1), n - 1)
        train_idx.append(rng.permutation(members)[:n_train])
    in_train = np.zeros(len(ds), dtype=bool)
    if train_idx:
        in_train[np.concatenate(train_idx)] = True
    return ds.take(np.flatnonzero(in_train)), ds.take(np.flatnonzero(~in_train))


def rebalance(ds: LabeledDataset, mode: str = "oversample", seed: int = 0) -> LabeledDataset:
    """Equalize class counts.

    ``oversample`` appends with-replacement duplicates of each smaller class
    until it matches the largest; duplicates get ids ``<id>~<k>`` so ids stay
    unique. ``undersample`` keeps a random subset of each larger class.
    """
    if mode not in ("oversample", "undersample"):
        raise DataError(f"unknown rebalance mode {mode!r}")
    counts = class_counts(ds)
    if len(counts) < 2:
        raise DataError("rebalancing needs at least two classes", "empty_class")
    rng = np.random.default_rng(seed)
    if mode == "undersample":
        target = min(counts.values())
        keep = []
        for label in counts:
            members = np.flatnonzero(ds.labels == label)
            keep.append(np.sort(rng.choice(members, size=target, replace=False)))
        return ds.take(np.sort(np.concatenate(keep)))

    target = max(counts.values())
    extra_idx, extra_ids = [], []
    copies = Counter()
    for label, n in counts.items():
        if n == target:
            continue
        members = np.flatnonzero(ds.labels == label)
        for i in rng.choice(members, size=target - n, replace=True):
            copies[i] += 1
            extra_idx.append(i)
            extra_ids.append(f"{ds.ids[i]}~{copies[i]}")
    if not extra_idx:
        return ds
    extra_idx = np.array(extra_idx)
    return LabeledDataset(
        ds.schema,
        ds.ids + tuple(extra_ids),
        np.vstack([ds.X, ds.X[extra_idx]]),
        np.concatenate([ds.labels, ds.labels[extra_idx]]),
        dict(ds.meta),
    )
