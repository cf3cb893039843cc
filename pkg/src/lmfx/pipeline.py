"""End-to-end pipeline: load, expand, compress, fit, then answer queries.

The :class:`Analysis` bundle is the unit the CLI and the HTTP service share.
It is built once per (dataset, spec) pair, records per-phase wall times, and
is immutable afterwards; queries read from it concurrently without refitting.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .compress import CompressedDataset, compress
from .data import (
    CATEGORICAL,
    KEY,
    NUMERIC,
    Column,
    Dataset,
    csv_header,
    load_csv,
)
from .design import (
    CATEGORICAL_TERM,
    INTERACTION,
    NUMERIC_TERM,
    TIME_BASIS,
    ModelMatrix,
    ModelSpec,
    Term,
    build_model_matrix,
)
from .effects import EffectEstimate, EffectQuery, ate, cate, reference_path_effects
from .errors import DataError, VerifyError
from .solver import FittedModel, fit

_ROW_KEY = "__row_id__"


def _term_schema(term: Term, schema: dict[str, str]) -> None:
    if term.kind == NUMERIC_TERM:
        schema.setdefault(term.column, NUMERIC)
    elif term.kind == CATEGORICAL_TERM:
        schema.setdefault(term.column, CATEGORICAL)
    elif term.kind == TIME_BASIS:
        schema.setdefault(term.column, KEY)
    elif term.kind == INTERACTION:
        for f in term.factors:
            _term_schema(f, schema)


def derive_schema(
    spec: ModelSpec,
    extra_keys: tuple[str, ...] | list[str] = (),
    overrides: dict[str, str] | None = None,
) -> dict[str, str]:
    """Column-kind map implied by a model spec, for loading raw files.

    Outcomes are numeric, the treatment categorical, term columns follow
    their term kind, the time key is an integer key, and the cluster key and
    any extra grouping keys default to categorical. ``overrides`` wins where
    the caller knows better (e.g. a numeric grouping key).
    """
    schema: dict[str, str] = {spec.treatment: CATEGORICAL}
    for name in spec.outcomes:
        schema[name] = NUMERIC
    for term in spec.terms:
        _term_schema(term, schema)
    if spec.time_key:
        schema.setdefault(spec.time_key, KEY)
    if spec.cluster_key:
        schema.setdefault(spec.cluster_key, CATEGORICAL)
    for name in extra_keys:
        schema.setdefault(name, CATEGORICAL)
    if overrides:
        schema.update(overrides)
    return schema


@dataclass
class Analysis:
    """One fitted experiment: every artifact needed to answer live queries."""

    dataset: Dataset
    spec: ModelSpec
    matrix: ModelMatrix
    compressed: CompressedDataset
    fitted: FittedModel
    timings: dict[str, float] = field(default_factory=dict)
    fit_count: int = 1
    # Every column present in the source file, loaded or not; lets callers
    # distinguish "slice key exists but was not compressed by" from "no such
    # column anywhere".
    source_columns: tuple[str, ...] = ()

    def diagnostics(self) -> dict:
        cd, fm = self.compressed, self.fitted
        return {
            "n": cd.n,
            "p": fm.p,
            "groups": cd.n_groups,
            "compression_ratio": cd.compression_ratio,
            "outcomes": list(cd.outcomes),
            "arms": [
                a for a in self.matrix.treatment_levels if a != self.matrix.reference
            ],
            "reference": self.matrix.reference,
            "grouping_keys": [k for k in cd.key_order if k != _ROW_KEY],
            "n_clusters": cd.n_clusters,
            "fit_count": self.fit_count,
            "timings": dict(self.timings),
        }

    def query(self, q: EffectQuery) -> list[EffectEstimate]:
        """Answer one effect query; a list even for ATE, for uniform handling."""
        if q.grouping:
            return cate(self.fitted, self.compressed, self.spec, q)
        return [ate(self.fitted, self.compressed, self.spec, q)]


def _with_row_key(ds: Dataset) -> Dataset:
    if _ROW_KEY in ds.columns:
        raise DataError(f"column name {_ROW_KEY!r} is reserved")
    columns = dict(ds.columns)
    columns[_ROW_KEY] = Column(KEY, np.arange(ds.n_rows, dtype=np.int64))
    return Dataset(columns=columns, n_rows=ds.n_rows, sort_state=())


def analyze_dataset(
    ds: Dataset,
    spec: ModelSpec,
    extra_keys: tuple[str, ...] | list[str] = (),
    compression: bool = True,
) -> Analysis:
    """Expand, compress, and fit an in-memory dataset.

    With ``compression`` off, a synthetic per-row key forces every group to a
    single row: the same code path runs on unreduced data, which is how the
    compressed/uncompressed equivalence is checked.
    """
    keys = tuple(extra_keys)
    if not compression:
        ds = _with_row_key(ds)
        keys = keys + (_ROW_KEY,)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    mm = build_model_matrix(ds, spec)
    t1 = time.perf_counter()
    timings["matrix"] = t1 - t0
    cd = compress(ds, mm, spec, extra_keys=keys)
    t2 = time.perf_counter()
    timings["compress"] = t2 - t1
    fm = fit(cd)
    timings["fit"] = time.perf_counter() - t2
    return Analysis(
        dataset=ds,
        spec=spec,
        matrix=mm,
        compressed=cd,
        fitted=fm,
        timings=timings,
    )


def analyze_file(
    path: str,
    spec: ModelSpec,
    extra_keys: tuple[str, ...] | list[str] = (),
    compression: bool = True,
    schema_overrides: dict[str, str] | None = None,
) -> Analysis:
    """Load a CSV and run :func:`analyze_dataset`; records load time too."""
    schema = derive_schema(spec, extra_keys, schema_overrides)
    t0 = time.perf_counter()
    ds = load_csv(path, schema)
    load_seconds = time.perf_counter() - t0
    analysis = analyze_dataset(ds, spec, extra_keys, compression)
    analysis.timings["load"] = load_seconds
    analysis.source_columns = csv_header(path)
    return analysis


def verify_query(
    analysis: Analysis, q: EffectQuery, tolerance: float = 1e-10
) -> dict:
    """Check the engine against the materialized reference path for one query.

    Compares estimates and standard errors cell by cell at an absolute
    tolerance; raises :class:`VerifyError` naming the worst cell on mismatch.
    Returns a small report dict on success.
    """
    fast = analysis.query(q)
    ref = reference_path_effects(analysis.dataset, analysis.spec, q)
    if len(fast) != len(ref):
        raise VerifyError(
            f"cell count mismatch: engine produced {len(fast)}, "
            f"reference path {len(ref)}"
        )
    worst = 0.0
    worst_cell: tuple = ()
    by_key = {r.group_key: r for r in ref}
    for cell in fast:
        other = by_key.get(cell.group_key)
        if other is None:
            raise VerifyError(f"group {cell.group_key!r} missing from reference path")
        diff = max(
            abs(cell.estimate - other.estimate),
            abs(cell.std_error - other.std_error),
        )
        if diff > worst:
            worst, worst_cell = diff, cell.group_key
    if worst > tolerance:
        raise VerifyError(
            f"engine and reference path disagree by {worst:.3e} "
            f"at group {worst_cell!r} (tolerance {tolerance:.0e})"
        )
    return {
        "cells": len(fast),
        "max_abs_difference": worst,
        "tolerance": tolerance,
    }
