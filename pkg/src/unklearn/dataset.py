"""Records, integrated samples with duplicates, and frequency profiles.

An integrated sample is the concatenation of several overlapping sources
*before* de-duplication. The duplicate counts are the only signal the
species estimators get, so nothing here ever collapses them implicitly.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInputError, ParseError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# columns appended by the correction step; never treated as data
RESERVED_COLUMNS = ("weight", "synthetic")

_KEY_SEP = "\x1f"


def canonical_number(value: float) -> str:
    """Shortest round-trip decimal form; ``-0.0`` folds into ``0.0``."""
    value = float(value)
    if value == 0.0:
        value = 0.0
    return repr(value)


def parse_number(text: str) -> float:
    value = float(text.strip())
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _canonical(value) -> str:
    if isinstance(value, str):
        return value
    return canonical_number(value)


@dataclass(frozen=True)
class Record:
    features: tuple
    label: object
    dedup_key: str = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        parts = [_canonical(v) for v in self.features]
        parts.append(_canonical(self.label))
        object.__setattr__(self, "dedup_key", _KEY_SEP.join(parts))

    def __eq__(self, other):
        if not isinstance(other, Record):
            return NotImplemented
        return self.dedup_key == other.dedup_key

    def __hash__(self):
        return hash(self.dedup_key)


@dataclass(frozen=True)
class Schema:
    """Column layout of a dataset: feature names/kinds and the label column."""

    feature_names: tuple
    feature_kinds: tuple
    label: str
    label_kind: str = NUMERIC

    def __post_init__(self):
        if len(self.feature_names) == 0:
            raise SchemaError("at least one feature column is required")
        if len(self.feature_names) != len(self.feature_kinds):
            raise SchemaError("feature names and kinds differ in length")
        for kind in (*self.feature_kinds, self.label_kind):
            if kind not in (NUMERIC, CATEGORICAL):
                raise SchemaError(f"unknown column kind {kind!r}")

    @property
    def d(self) -> int:
        return len(self.feature_names)

    @property
    def numeric_indices(self) -> tuple:
        return tuple(i for i, k in enumerate(self.feature_kinds) if k == NUMERIC)

    @property
    def is_classification(self) -> bool:
        return self.label_kind == CATEGORICAL

    @property
    def columns(self) -> tuple:
        return (*self.feature_names, self.label)

    def column_index(self, name: str) -> int:
        """Feature index of ``name``; the label column maps to ``-1``."""
        if name == self.label:
            return -1
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown column {name!r}") from None

    def validate(self, record: Record) -> None:
        if len(record.features) != self.d:
            raise SchemaError(
                f"record has {len(record.features)} features, schema has {self.d}"
            )
        for name, kind, value in zip(self.feature_names, self.feature_kinds, record.features):
            if (kind == NUMERIC) == isinstance(value, str):
                raise SchemaError(f"column {name!r} expects {kind} values")
        if (self.label_kind == NUMERIC) == isinstance(record.label, str):
            raise SchemaError(f"label {self.label!r} expects {self.label_kind} values")


@dataclass(frozen=True)
class ColumnSpec:
    """User-facing schema description, resolved against a CSV header.

    Columns not listed in ``categorical`` are numeric. ``features`` restricts
    the feature set; by default every non-label, non-reserved column is used.
    """

    label: str
    categorical: frozenset = frozenset()
    features: tuple | None = None

    def resolve(self, header: Sequence[str]) -> Schema:
        header = [h.strip() for h in header]
        if self.label not in header:
            raise SchemaError(f"label column {self.label!r} not in header")
        if self.features is None:
            names = [h for h in header if h != self.label and h not in RESERVED_COLUMNS]
        else:
            missing = [f for f in self.features if f not in header]
            if missing:
                raise SchemaError(f"missing feature columns: {', '.join(missing)}")
            names = list(self.features)
        unknown = set(self.categorical) - set(header)
        if unknown:
            raise SchemaError(f"categorical columns not in header: {sorted(unknown)}")
        kinds = tuple(CATEGORICAL if n in self.categorical else NUMERIC for n in names)
        label_kind = CATEGORICAL if self.label in self.categorical else NUMERIC
        return Schema(tuple(names), kinds, self.label, label_kind)


@dataclass(frozen=True)
class IntegratedSample:
    """A multiset of records (duplicates preserved) under one schema."""

    records: tuple
    schema: Schema

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def n(self) -> int:
        return len(self.records)

    n_S = n

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def keys(self) -> list:
        return [r.dedup_key for r in self.records]

    def replace_records(self, records: Iterable[Record]) -> "IntegratedSample":
        return IntegratedSample(tuple(records), self.schema)

    def feature_matrix(self, indices: Sequence[int] | None = None) -> np.ndarray:
        """Float matrix of the numeric features (or the given feature indices)."""
        if indices is None:
            indices = self.schema.numeric_indices
        if not self.records:
            return np.empty((0, len(indices)))
        return np.array([[r.features[i] for i in indices] for r in self.records], dtype=float)

    def labels(self) -> np.ndarray:
        if self.schema.is_classification:
            return np.array([r.label for r in self.records], dtype=object)
        return np.array([r.label for r in self.records], dtype=float)

    def column(self, index: int) -> np.ndarray:
        """Values of feature ``index``; ``-1`` is the label."""
        if index == -1:
            return self.labels()
        return np.array([r.features[index] for r in self.records], dtype=float)


@dataclass(frozen=True)
class FrequencyProfile:
    c: int
    n: int
    f: dict

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "FrequencyProfile":
        """Profile from per-item multiplicities (zeros ignored)."""
        counts = [int(x) for x in counts if x > 0]
        f = dict(sorted(Counter(counts).items()))
        return cls(c=len(counts), n=sum(counts), f=f)

    @property
    def f1(self) -> int:
        return self.f.get(1, 0)

    @property
    def f2(self) -> int:
        return self.f.get(2, 0)

    def to_dict(self) -> dict:
        return {"c": self.c, "n": self.n, "f": {str(k): v for k, v in self.f.items()}}


def frequency_profile(sample: IntegratedSample | Iterable[Record]) -> FrequencyProfile:
    records = sample.records if isinstance(sample, IntegratedSample) else tuple(sample)
    if not records:
        raise EmptyInputError("cannot profile an empty sample")
    return FrequencyProfile.from_counts(Counter(r.dedup_key for r in records).values())


def deduplicate(sample: IntegratedSample) -> IntegratedSample:
    """Keep the first occurrence of every dedup key, in first-seen order."""
    return sample.replace_records(unique_records(sample.records))


def unique_records(records: Iterable[Record]) -> list:
    seen = set()
    out = []
    for r in records:
        if r.dedup_key not in seen:
            seen.add(r.dedup_key)
            out.append(r)
    return out


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path}: file is empty")
        rows = [row for row in reader if row]
    return header, rows


def load_table(path, spec: ColumnSpec) -> tuple[IntegratedSample, dict]:
    """Read a CSV into a sample; also returns any reserved columns present.

    The returned dict maps ``"weight"`` to a float array and ``"synthetic"``
    to a bool array when those columns exist in the file.
    """
    header, rows = _read_rows(path)
    header = [h.strip() for h in header]
    schema = spec.resolve(header)
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    pos = {name: header.index(name) for name in header}
    feat_pos = [pos[n] for n in schema.feature_names]
    label_pos = pos[schema.label]
    extras = {name: [] for name in RESERVED_COLUMNS if name in pos}

    records = []
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} cells, got {len(row)}", row=i)
        values = []
        for name, kind, p in zip(schema.feature_names, schema.feature_kinds, feat_pos):
            values.append(_parse_cell(row[p], kind, name, i))
        label = _parse_cell(row[label_pos], schema.label_kind, schema.label, i)
        records.append(Record(tuple(values), label))
        for name in extras:
            cell = row[pos[name]].strip()
            if name == "weight":
                extras[name].append(_parse_cell(cell, NUMERIC, name, i))
            else:
                extras[name].append(cell.lower() in ("1", "true", "yes"))

    out = {}
    if "weight" in extras:
        out["weight"] = np.array(extras["weight"], dtype=float)
    if "synthetic" in extras:
        out["synthetic"] = np.array(extras["synthetic"], dtype=bool)
    return IntegratedSample(tuple(records), schema), out


def load_csv(path, spec: ColumnSpec) -> IntegratedSample:
    return load_table(path, spec)[0]


def _parse_cell(cell, kind, column, row):
    if kind == CATEGORICAL:
        return cell.strip()
    try:
        return parse_number(cell)
    except ValueError:
        raise ParseError(
            f"row {row}: column {column!r} has non-numeric value {cell!r}", row=row
        ) from None


def write_csv(sample: IntegratedSample, path, weights=None, synthetic=None) -> None:
    """Write a sample in its schema's column order plus optional extras."""
    header = list(sample.schema.columns)
    if weights is not None:
        header.append("weight")
    if synthetic is not None:
        header.append("synthetic")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, r in enumerate(sample.records):
            row = [_canonical(v) for v in r.features]
            row.append(_canonical(r.label))
            if weights is not None:
                row.append(canonical_number(weights[i]))
            if synthetic is not None:
                row.append("true" if synthetic[i] else "false")
            w.writerow(row)


def records_from_arrays(X, y, schema: Schema) -> list:
    """Build records from an all-numeric feature matrix and label vector."""
    if len(schema.numeric_indices) != schema.d:
        raise SchemaError("records_from_arrays needs an all-numeric schema")
    out = []
    for row, label in zip(np.asarray(X, dtype=float), y):
        label = str(label) if schema.is_classification else float(label)
        out.append(Record(tuple(float(v) for v in row), label))
    return out


def numeric_schema(d: int, classification: bool = False, names=None, label="y") -> Schema:
    names = tuple(names) if names is not None else tuple(f"x{i + 1}" for i in range(d))
    return Schema(names, (NUMERIC,) * d, label, CATEGORICAL if classification else NUMERIC)


def sample_from_arrays(X, y, classification: bool = False, names=None) -> IntegratedSample:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 1 and len(y) != 1:
        X = X.T
    schema = numeric_schema(X.shape[1], classification, names)
    return IntegratedSample(tuple(records_from_arrays(X, y, schema)), schema)

