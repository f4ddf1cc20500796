"""Typed mixed-type tables and the preprocessing steps applied before modelling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AllRowsDropped,
    NegativeValue,
    SchemaError,
    SingleClass,
    UnknownReferenceLevel,
)

MISSING_MARKERS = frozenset({"", "NA"})
MAJORITY_CAP = (11, 20)  # 55%, as an exact fraction


class Kind(str, Enum):
    NUMERIC = "numeric"
    BINARY = "binary"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    """One column declaration.

    ``levels`` is required for categorical columns (>= 2 distinct names, the
    stored value is the level index). Binary columns may optionally name their
    two states, ``levels[0]`` being encoded as 0 and ``levels[1]`` as 1.
    """

    name: str
    kind: Kind
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.kind is Kind.CATEGORICAL:
            if len(set(self.levels)) < 2 or len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"categorical column {self.name!r} needs >= 2 distinct levels")
        elif self.kind is Kind.BINARY:
            if self.levels and (len(self.levels) != 2 or self.levels[0] == self.levels[1]):
                raise SchemaError(f"binary column {self.name!r} takes exactly two level names")
        elif self.levels:
            raise SchemaError(f"numeric column {self.name!r} cannot declare levels")

    @property
    def is_numeric(self) -> bool:
        return self.kind is Kind.NUMERIC

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind.value}
        if self.levels:
            out["levels"] = list(self.levels)
        return out


def numeric(name: str) -> Column:
    return Column(name, Kind.NUMERIC)


def binary(name: str, levels: Sequence[str] = ()) -> Column:
    return Column(name, Kind.BINARY, tuple(levels))


def categorical(name: str, levels: Sequence[str]) -> Column:
    return Column(name, Kind.CATEGORICAL, tuple(levels))


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    response: str

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dup}")
        if self.response not in names:
            raise SchemaError(f"response column {self.response!r} not declared")
        if self.column(self.response).kind is not Kind.BINARY:
            raise SchemaError(f"response column {self.response!r} must be binary")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def predictors(self) -> list[Column]:
        return [c for c in self.columns if c.name != self.response]

    @property
    def numeric_predictors(self) -> list[Column]:
        return [c for c in self.predictors if c.kind is Kind.NUMERIC]

    @property
    def categorical_predictors(self) -> list[Column]:
        """Binary and multi-class predictors, i.e. everything compared by mismatch."""
        return [c for c in self.predictors if c.kind is not Kind.NUMERIC]

    def to_json(self) -> dict:
        return {"columns": [c.to_json() for c in self.columns], "response": self.response}


class Dataset:
    """Column-major, immutable table conforming to a :class:`Schema`.

    Numeric columns are float64, binary columns int64 in {0, 1}, categorical
    columns int64 level indices. Missing cells are not representable.
    """

    __slots__ = ("schema", "_data", "n_rows")

    def __init__(self, schema: Schema, data: Mapping[str, Iterable]):
        if set(data) != set(schema.names):
            raise SchemaError(
                f"data columns {sorted(data)} do not match schema columns {sorted(schema.names)}"
            )
        cols = {}
        n = None
        for col in schema.columns:
            if col.kind is Kind.NUMERIC:
                arr = np.array(data[col.name], dtype=np.float64)
                if arr.size and not np.all(np.isfinite(arr)):
                    raise SchemaError(f"column {col.name!r} has non-finite values")
            else:
                raw = np.asarray(data[col.name])
                arr = raw.astype(np.int64)
                if raw.size and not np.array_equal(arr, raw):
                    raise SchemaError(f"column {col.name!r} has non-integer codes")
                n_levels = 2 if col.kind is Kind.BINARY else len(col.levels)
                if arr.size and (arr.min() < 0 or arr.max() >= n_levels):
                    raise SchemaError(f"column {col.name!r} has codes outside [0, {n_levels})")
            if arr.ndim != 1:
                raise SchemaError(f"column {col.name!r} must be one-dimensional")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise SchemaError("columns have different lengths")
            arr.setflags(write=False)
            cols[col.name] = arr
        self.schema = schema
        self._data = cols
        self.n_rows = 0 if n is None else int(n)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._data[name]

    def __len__(self) -> int:
        return self.n_rows

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.schema == other.schema and all(
            np.array_equal(self._data[k], other._data[k]) for k in self.schema.names
        )

    def __repr__(self):
        return f"Dataset(n_rows={self.n_rows}, columns={self.schema.names})"

    def to_dict(self) -> dict[str, np.ndarray]:
        return dict(self._data)

    @property
    def response(self) -> np.ndarray:
        return self._data[self.schema.response]

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, {k: v[idx] for k, v in self._data.items()})

    def with_columns(self, updates: Mapping[str, np.ndarray]) -> "Dataset":
        data = dict(self._data)
        data.update(updates)
        return Dataset(self.schema, data)

    def numeric_block(self) -> np.ndarray:
        names = [c.name for c in self.schema.numeric_predictors]
        if not names:
            return np.zeros((self.n_rows, 0))
        return np.column_stack([self._data[k] for k in names])

    def categorical_block(self) -> np.ndarray:
        names = [c.name for c in self.schema.categorical_predictors]
        if not names:
            return np.zeros((self.n_rows, 0), dtype=np.int64)
        return np.column_stack([self._data[k] for k in names])

    def class_counts(self) -> tuple[int, int]:
        y = self.response
        n1 = int(y.sum())
        return self.n_rows - n1, n1


@dataclass
class PreprocessReport:
    rows_dropped_missing: int = 0
    normalization_divisors: dict[str, float] = field(default_factory=dict)
    zero_columns: list[str] = field(default_factory=list)
    rows_removed_undersampling: int = 0
    final_class_counts: tuple[int, int] = (0, 0)

    def to_json(self) -> dict:
        return {
            "rows_dropped_missing": self.rows_dropped_missing,
            "normalization_divisors": dict(self.normalization_divisors),
            "zero_columns": list(self.zero_columns),
            "rows_removed_undersampling": self.rows_removed_undersampling,
            "final_class_counts": list(self.final_class_counts),
        }


class ZeroColumnWarning(UserWarning):
    """A numeric column is constant zero and was left unscaled."""


def normalize_numeric(ds: Dataset) -> tuple[Dataset, dict[str, float]]:
    """Divide every numeric column by its maximum so values land in [0, 1].

    All-zero columns keep divisor 1 and raise a :class:`ZeroColumnWarning`.
    """
    divisors: dict[str, float] = {}
    updates = {}
    for col in ds.schema.columns:
        if col.kind is not Kind.NUMERIC:
            continue
        x = ds[col.name]
        if x.size == 0:
            divisors[col.name] = 1.0
            continue
        if x.min() < 0:
            raise NegativeValue(f"column {col.name!r} has negative values (min {x.min()})")
        top = float(x.max())
        if top == 0.0:
            warnings.warn(f"numeric column {col.name!r} is all zero", ZeroColumnWarning, stacklevel=2)
            top = 1.0
        divisors[col.name] = top
        updates[col.name] = x / top
    return ds.with_columns(updates), divisors


def undersample(ds: Dataset, seed: int) -> Dataset:
    """Randomly drop majority-class rows until that class is at most 55% of the data.

    Keeps the largest majority count ``m`` with ``m / (m + minority) <= 0.55``.
    Surviving rows keep their original order.
    """
    y = ds.response
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if pos.size == 0 or neg.size == 0:
        raise SingleClass("undersampling needs both response classes")
    major, minor = (pos, neg) if pos.size > neg.size else (neg, pos)
    num, den = MAJORITY_CAP
    keep = (num * minor.size) // (den - num)
    if major.size <= keep:
        return ds
    rng = np.random.default_rng(seed)
    chosen = rng.choice(major, size=keep, replace=False)
    return ds.take(np.sort(np.concatenate([minor, chosen])))


@dataclass(frozen=True)
class DesignMatrix:
    """Numeric model input: one row per observation, intercept not included.

    ``sources[j]`` names the schema column that design column ``j`` came from.
    """

    column_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    sources: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, indices) -> "DesignMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return DesignMatrix(self.column_names, self.X[idx], self.y[idx], self.sources)

    def constant_columns(self) -> list[int]:
        if self.n == 0:
            return list(range(self.d))
        return [j for j in range(self.d) if np.all(self.X[:, j] == self.X[0, j])]


def resolve_reference_levels(schema: Schema, reference_levels: Mapping[str, str] | None = None) -> dict[str, str]:
    reference_levels = dict(reference_levels or {})
    out = {}
    for col in schema.predictors:
        if col.kind is not Kind.CATEGORICAL:
            if col.name in reference_levels:
                raise UnknownReferenceLevel(f"{col.name!r} is not a multi-class column")
            continue
        ref = reference_levels.pop(col.name, col.levels[0])
        if ref not in col.levels:
            raise UnknownReferenceLevel(f"level {ref!r} not in column {col.name!r} levels {col.levels}")
        out[col.name] = ref
    if reference_levels:
        raise UnknownReferenceLevel(f"unknown columns in reference_levels: {sorted(reference_levels)}")
    return out


def one_hot(ds: Dataset, reference_levels: Mapping[str, str] | None = None) -> DesignMatrix:
    """Expand multi-class predictors into indicators, dropping each reference level."""
    refs = resolve_reference_levels(ds.schema, reference_levels)
    names, blocks, sources = [], [], []
    for col in ds.schema.predictors:
        x = ds[col.name]
        if col.kind is Kind.CATEGORICAL:
            ref = col.levels.index(refs[col.name])
            for i, level in enumerate(col.levels):
                if i == ref:
                    continue
                names.append(f"{col.name}:{level}")
                blocks.append((x == i).astype(np.float64))
                sources.append(col.name)
        else:
            names.append(col.name)
            blocks.append(x.astype(np.float64))
            sources.append(col.name)
    X = np.column_stack(blocks) if blocks else np.zeros((ds.n_rows, 0))
    return DesignMatrix(tuple(names), X, ds.response.astype(np.int64), tuple(sources))


def is_missing(token: str | None) -> bool:
    return token is None or token.strip() in MISSING_MARKERS


def drop_missing(records: Sequence[Mapping[str, str]], columns: Sequence[str] | None = None):
    """Remove raw records that have a missing marker in any (listed) cell.

    Returns ``(kept_records, dropped_count)``. Raises :class:`AllRowsDropped`
    when there were records but none survived.
    """
    kept = []
    for rec in records:
        keys = rec.keys() if columns is None else columns
        if not any(is_missing(rec.get(k)) for k in keys):
            kept.append(rec)
    if records and not kept:
        raise AllRowsDropped(f"all {len(records)} rows contain missing cells")
    return kept, len(records) - len(kept)
