"""Columnar experiment data: typed columns, stable row order, sorted group ranges.

A :class:`Dataset` holds the raw observations (outcomes, treatment arm,
covariates, grouping and cluster keys) as named columns over a shared row
order. Row order is the unit of identity: every matrix built downstream is
stamped with the dataset's version, and sorting produces a new dataset with
a new version so stale matrices are detected rather than silently reused.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .errors import DataError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
KEY = "key"

_KINDS = (NUMERIC, CATEGORICAL, KEY)

_version_counter = itertools.count(1)


@dataclass(frozen=True)
class Column:
    """One typed column: float64 values, dictionary-encoded levels, or int64 keys.

    For categorical columns ``values`` holds int32 level ids into ``levels``,
    which is sorted lexicographically so dummy encoding is deterministic.
    """

    kind: str
    values: NDArray
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DataError(f"unknown column kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if self.levels is None:
                raise DataError("categorical column requires a level table")
            if self.values.size and (
                self.values.min() < 0 or self.values.max() >= len(self.levels)
            ):
                raise DataError("categorical level id out of level-table bounds")

    def __len__(self) -> int:
        return len(self.values)

    def decode(self) -> NDArray:
        """Return human-readable values (level strings for categoricals)."""
        if self.kind == CATEGORICAL:
            return np.asarray(self.levels, dtype=object)[self.values]
        return self.values

    def take(self, order: NDArray) -> "Column":
        return Column(self.kind, self.values[order], self.levels)


@dataclass(frozen=True)
class Dataset:
    """Immutable columnar table with a version stamp and current sort state."""

    columns: dict[str, Column]
    n_rows: int
    sort_state: tuple[str, ...] = ()
    version: int = field(default_factory=lambda: next(_version_counter))

    def __post_init__(self):
        for name, col in self.columns.items():
            if not name:
                raise DataError("column names must be non-empty")
            if len(col) != self.n_rows:
                raise DataError(
                    f"column {name!r} has {len(col)} rows, expected {self.n_rows}"
                )

    def __getitem__(self, name: str) -> Column:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}") from None

    def require(self, names: Iterable[str]) -> None:
        for name in names:
            if name not in self.columns:
                raise DataError(f"unknown column {name!r}")


def _encode_categorical(raw: pd.Series, name: str) -> Column:
    values = raw.astype(str).to_numpy(dtype=object)
    if raw.isna().any():
        row = int(raw.index[raw.isna()][0])
        raise DataError(f"missing value in categorical column {name!r} at row {row}")
    # Discovery order is first appearance; the level table is then sorted
    # lexicographically so coefficient order is stable across runs.
    levels = sorted(pd.unique(values))
    lookup = {lev: i for i, lev in enumerate(levels)}
    codes = np.fromiter((lookup[v] for v in values), dtype=np.int32, count=len(values))
    return Column(CATEGORICAL, codes, tuple(levels))


def _encode_numeric(raw: pd.Series, name: str) -> Column:
    try:
        vals = raw.to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DataError(f"numeric column {name!r} failed to parse: {exc}") from exc
    bad = ~np.isfinite(vals)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DataError(f"NaN/Inf in numeric column {name!r} at row {row}")
    return Column(NUMERIC, vals)


def _encode_key(raw: pd.Series, name: str) -> Column:
    if raw.isna().any():
        row = int(raw.index[raw.isna()][0])
        raise DataError(f"missing value in key column {name!r} at row {row}")
    try:
        vals = raw.to_numpy(dtype=np.int64)
    except (TypeError, ValueError, OverflowError) as exc:
        raise DataError(f"key column {name!r} is not integral: {exc}") from exc
    return Column(KEY, vals)


def from_frame(frame: pd.DataFrame, schema: dict[str, str]) -> Dataset:
    """Build a Dataset from an in-memory frame, validating against ``schema``."""
    columns: dict[str, Column] = {}
    for name, kind in schema.items():
        if name not in frame.columns:
            raise DataError(f"schema names column {name!r} absent from data")
        raw = frame[name].reset_index(drop=True)
        if kind == NUMERIC:
            columns[name] = _encode_numeric(raw, name)
        elif kind == CATEGORICAL:
            columns[name] = _encode_categorical(raw, name)
        elif kind == KEY:
            columns[name] = _encode_key(raw, name)
        else:
            raise DataError(f"unknown kind {kind!r} for column {name!r}")
    return Dataset(columns=columns, n_rows=len(frame))


def load_csv(path: str, schema: dict[str, str]) -> Dataset:
    """Load a UTF-8 comma-separated file with a header row into a Dataset.

    ``schema`` maps column name to one of ``numeric``, ``categorical``,
    ``key`` and must declare every column used downstream. Numeric columns
    reject NaN/Inf; missing cells are rejected for all kinds.
    """
    try:
        frame = pd.read_csv(
            path,
            usecols=list(schema),
            dtype={n: (np.float64 if k == NUMERIC else str) for n, k in schema.items()},
            encoding="utf-8",
            # The default fast parser is off by one ulp on some values; exact
            # parsing keeps write/load round trips bit-identical.
            float_precision="round_trip",
        )
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    except ValueError as exc:
        # pandas raises ValueError both for usecols misses and parse failures
        raise DataError(f"failed to parse {path}: {exc}") from exc
    return from_frame(frame, schema)


def csv_header(path: str) -> tuple[str, ...]:
    """Column names in a CSV file, without reading any rows."""
    try:
        frame = pd.read_csv(path, nrows=0, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    except ValueError as exc:
        raise DataError(f"failed to parse {path}: {exc}") from exc
    return tuple(str(c) for c in frame.columns)


def write_csv(ds: Dataset, path: str) -> None:
    """Write the dataset back out; load_csv on the result round-trips."""
    frame = pd.DataFrame({name: col.decode() for name, col in ds.columns.items()})
    frame.to_csv(path, index=False)


def sort_by(ds: Dataset, keys: Sequence[str]) -> Dataset:
    """Stably sort rows by ``keys`` (first key primary); all columns permuted."""
    keys = list(keys)
    ds.require(keys)
    # np.lexsort: last key is primary, so reverse.
    order = np.lexsort([ds[k].values for k in reversed(keys)])
    if np.array_equal(order, np.arange(ds.n_rows)):
        if tuple(keys) == ds.sort_state[: len(keys)]:
            return ds
        return Dataset(
            columns=ds.columns,
            n_rows=ds.n_rows,
            sort_state=tuple(keys),
            version=ds.version,
        )
    return Dataset(
        columns={name: col.take(order) for name, col in ds.columns.items()},
        n_rows=ds.n_rows,
        sort_state=tuple(keys),
    )


def contiguous_ranges(
    arrays: Sequence[NDArray],
) -> tuple[NDArray, NDArray]:
    """Boundaries of runs of identical tuples over parallel sorted arrays.

    Returns (starts, ends) with half-open ranges covering every row, found
    in one pass (vectorized adjacent-difference scan).
    """
    n = len(arrays[0]) if arrays else 0
    if n == 0:
        return np.array([], dtype=np.int64), np.array([], dtype=np.int64)
    change = np.zeros(n - 1, dtype=bool)
    for arr in arrays:
        change |= arr[1:] != arr[:-1]
    starts = np.concatenate(([0], np.flatnonzero(change) + 1))
    ends = np.concatenate((starts[1:], [n]))
    return starts, ends


def group_ranges(
    ds: Dataset, keys: Sequence[str]
) -> list[tuple[tuple, tuple[int, int]]]:
    """Contiguous row ranges per distinct key tuple; requires rows sorted by keys."""
    keys = list(keys)
    ds.require(keys)
    if tuple(keys) != ds.sort_state[: len(keys)]:
        raise DataError(
            f"dataset is sorted by {ds.sort_state}, not by {tuple(keys)}; sort first"
        )
    cols = [ds[k] for k in keys]
    starts, ends = contiguous_ranges([c.values for c in cols])
    out = []
    for s, e in zip(starts, ends):
        key = tuple(
            c.levels[c.values[s]] if c.kind == CATEGORICAL else c.values[s].item()
            for c in cols
        )
        out.append((key, (int(s), int(e))))
    return out
