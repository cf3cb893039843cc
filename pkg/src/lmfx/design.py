"""Model specification and sparse design-matrix construction.

Turns a declarative :class:`ModelSpec` into a CSC model matrix with full-rank
dummy encoding, plus the per-column machinery needed to score counterfactual
treatment assignments analytically: for every treatment-derived column the
matrix records the column's arm and, for interaction columns, a "delta basis"
(the product of the non-treatment factors). Column means of the counterfactual
difference matrix then come straight from those bases, so no treatment/control
copy of the matrix is ever materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iter_product

import numpy as np
from numpy.typing import NDArray
from scipy import sparse

from .data import CATEGORICAL, KEY, NUMERIC, Column, Dataset
from .errors import DataError, SpecError

INTERCEPT = "intercept"
NUMERIC_TERM = "numeric"
CATEGORICAL_TERM = "categorical"
INTERACTION = "interaction"
TIME_BASIS = "time_basis"


@dataclass(frozen=True)
class Term:
    """One additive term of the regression.

    ``kind`` is one of intercept / numeric / categorical / interaction /
    time_basis. Interactions hold simple (non-interaction) factor terms and
    expand to the cartesian product of the factors' expansions, left factor
    varying slowest.
    """

    kind: str
    column: str | None = None
    factors: tuple["Term", ...] = ()
    basis: str = "identity"
    degree: int = 1

    def columns_used(self) -> tuple[str, ...]:
        if self.kind == INTERACTION:
            out: list[str] = []
            for f in self.factors:
                out.extend(f.columns_used())
            return tuple(out)
        return (self.column,) if self.column else ()


def intercept() -> Term:
    return Term(INTERCEPT)


def numeric(column: str) -> Term:
    return Term(NUMERIC_TERM, column=column)


def categorical(column: str) -> Term:
    return Term(CATEGORICAL_TERM, column=column)


def interaction(*factors: Term) -> Term:
    return Term(INTERACTION, factors=tuple(factors))


def time_basis(column: str, basis: str = "identity", degree: int = 1) -> Term:
    return Term(TIME_BASIS, column=column, basis=basis, degree=degree)


@dataclass(frozen=True)
class ModelSpec:
    """Declarative regression description: outcomes, treatment, terms, keys."""

    outcomes: tuple[str, ...]
    treatment: str
    reference: str
    terms: tuple[Term, ...]
    cluster_key: str | None = None
    time_key: str | None = None

    def __post_init__(self):
        if not self.outcomes:
            raise SpecError("model spec declares no outcomes")
        used = set()
        for t in self.terms:
            used.update(t.columns_used())
        clash = used.intersection(self.outcomes)
        if clash:
            raise SpecError(f"outcome {sorted(clash)[0]!r} also appears as a covariate")
        for t in self.terms:
            if t.kind == INTERACTION:
                cols = [f.column for f in t.factors]
                if len(cols) < 2:
                    raise SpecError("interaction needs at least two factors")
                if len(set(cols)) != len(cols):
                    raise SpecError("interaction factors must be distinct")
                if sum(c == self.treatment for c in cols) > 1:
                    raise SpecError(
                        "at most one interaction factor may be the treatment column"
                    )
                if any(f.kind == INTERACTION for f in t.factors):
                    raise SpecError("interaction factors cannot be nested interactions")

    def referenced_columns(self) -> tuple[str, ...]:
        """Input columns the design matrix depends on (treatment included)."""
        seen: dict[str, None] = {self.treatment: None}
        for t in self.terms:
            for c in t.columns_used():
                seen[c] = None
        return tuple(seen)


def term_to_dict(term: Term) -> dict:
    if term.kind == INTERACTION:
        return {"kind": INTERACTION, "factors": [term_to_dict(f) for f in term.factors]}
    if term.kind == TIME_BASIS:
        return {
            "kind": TIME_BASIS,
            "column": term.column,
            "basis": term.basis,
            "degree": term.degree,
        }
    out = {"kind": term.kind}
    if term.column:
        out["column"] = term.column
    return out


def term_from_dict(obj: dict, treatment: str | None = None) -> Term:
    try:
        kind = obj["kind"]
    except (KeyError, TypeError):
        raise SpecError(f"term is missing a 'kind' field: {obj!r}") from None
    if kind == "treatment":
        if treatment is None:
            raise SpecError("'treatment' term used but no treatment column declared")
        return categorical(treatment)
    if kind == INTERCEPT:
        return intercept()
    if kind in (NUMERIC_TERM, CATEGORICAL_TERM):
        if "column" not in obj:
            raise SpecError(f"{kind} term requires a 'column' field")
        return Term(kind, column=obj["column"])
    if kind == TIME_BASIS:
        if "column" not in obj:
            raise SpecError("time_basis term requires a 'column' field")
        basis = obj.get("basis", "identity")
        if basis not in ("identity", "polynomial"):
            raise SpecError(f"unknown time basis {basis!r}")
        degree = int(obj.get("degree", 1))
        if degree < 1:
            raise SpecError("time_basis degree must be >= 1")
        return Term(TIME_BASIS, column=obj["column"], basis=basis, degree=degree)
    if kind == INTERACTION:
        factors = tuple(
            term_from_dict(f, treatment) for f in obj.get("factors", ())
        )
        return Term(INTERACTION, factors=factors)
    raise SpecError(f"unknown term kind {kind!r}")


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "outcomes": list(spec.outcomes),
        "treatment": {"column": spec.treatment, "reference": spec.reference},
        "terms": [term_to_dict(t) for t in spec.terms],
        "cluster_key": spec.cluster_key,
        "time_key": spec.time_key,
    }


def spec_from_dict(obj: dict) -> ModelSpec:
    if not isinstance(obj, dict):
        raise SpecError("model spec must be a JSON object")
    for required in ("outcomes", "treatment", "terms"):
        if required not in obj:
            raise SpecError(f"model spec is missing the {required!r} field")
    treatment = obj["treatment"]
    if not isinstance(treatment, dict) or "column" not in treatment:
        raise SpecError("'treatment' must be an object with 'column' and 'reference'")
    if "reference" not in treatment:
        raise SpecError("'treatment' must name a 'reference' level")
    tcol = treatment["column"]
    return ModelSpec(
        outcomes=tuple(obj["outcomes"]),
        treatment=tcol,
        reference=str(treatment["reference"]),
        terms=tuple(term_from_dict(t, tcol) for t in obj["terms"]),
        cluster_key=obj.get("cluster_key"),
        time_key=obj.get("time_key"),
    )


@dataclass(frozen=True)
class ColumnMeta:
    """Where an expanded matrix column came from.

    ``treatment_level`` is set iff the column switches on a treatment arm;
    ``basis_index`` points into the delta-basis storage for interaction
    columns (None for the arm's plain dummy, whose counterfactual delta is
    the constant 1).
    """

    label: str
    term_index: int
    treatment_level: str | None = None
    basis_index: int | None = None


# Internal expanded-column representation: idx is None for dense columns.
@dataclass
class _Col:
    idx: NDArray | None
    val: NDArray


def _col_product(a: _Col, b: _Col) -> _Col:
    if a.idx is None and b.idx is None:
        return _Col(None, a.val * b.val)
    if a.idx is None:
        return _Col(b.idx, a.val[b.idx] * b.val)
    if b.idx is None:
        return _Col(a.idx, a.val * b.val[a.idx])
    common, ia, ib = np.intersect1d(a.idx, b.idx, assume_unique=True, return_indices=True)
    return _Col(common, a.val[ia] * b.val[ib])


def _as_float(col: Column, name: str) -> NDArray:
    if col.kind == NUMERIC:
        return col.values
    if col.kind == KEY:
        return col.values.astype(np.float64)
    raise SpecError(f"column {name!r} is categorical; a numeric term needs numbers")


def _expand_simple(
    term: Term, ds: Dataset, spec: ModelSpec
) -> list[tuple[str, str | None, _Col]]:
    """Expand a non-interaction term to (label, treatment_level, column) triples."""
    if term.kind == INTERCEPT:
        return [("intercept", None, _Col(None, np.ones(ds.n_rows)))]
    if term.kind == NUMERIC_TERM:
        col = ds[term.column]
        return [(term.column, None, _Col(None, _as_float(col, term.column)))]
    if term.kind == TIME_BASIS:
        col = ds[term.column]
        t = _as_float(col, term.column)
        if term.basis == "identity":
            return [(term.column, None, _Col(None, t))]
        out = []
        for d in range(1, term.degree + 1):
            label = term.column if d == 1 else f"{term.column}^{d}"
            out.append((label, None, _Col(None, t**d)))
        return out
    if term.kind == CATEGORICAL_TERM:
        col = ds[term.column]
        if col.kind != CATEGORICAL:
            raise SpecError(
                f"column {term.column!r} is {col.kind}; a categorical term needs levels"
            )
        is_treatment = term.column == spec.treatment
        if is_treatment:
            if spec.reference not in col.levels:
                raise SpecError(
                    f"treatment reference level {spec.reference!r} absent from "
                    f"column {term.column!r}"
                )
            dropped = spec.reference
        else:
            dropped = col.levels[0]
        out = []
        for lid, level in enumerate(col.levels):
            if level == dropped:
                continue
            idx = np.flatnonzero(col.values == lid)
            out.append(
                (
                    f"{term.column}[{level}]",
                    level if is_treatment else None,
                    _Col(idx, np.ones(idx.size)),
                )
            )
        return out
    raise SpecError(f"term kind {term.kind!r} cannot appear here")


@dataclass(frozen=True)
class ModelMatrix:
    """Sparse n x p design matrix with per-column provenance and delta bases."""

    storage: sparse.csc_matrix
    column_meta: tuple[ColumnMeta, ...]
    dataset_version: int
    treatment_levels: tuple[str, ...]
    reference: str
    delta_bases: sparse.csc_matrix

    @property
    def n_rows(self) -> int:
        return self.storage.shape[0]

    @property
    def n_cols(self) -> int:
        return self.storage.shape[1]

    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.column_meta)


@dataclass(frozen=True)
class DeltaColumnMeans:
    """Row vector K = (1/n) 1' (M^treated - M^control), plus the row count."""

    values: NDArray
    n_effective: int


def _assemble_csc(cols: list[_Col], n_rows: int) -> sparse.csc_matrix:
    indptr = np.zeros(len(cols) + 1, dtype=np.int64)
    parts_idx: list[NDArray] = []
    parts_val: list[NDArray] = []
    full = None
    for j, c in enumerate(cols):
        if c.idx is None:
            if full is None:
                full = np.arange(n_rows, dtype=np.int64)
            parts_idx.append(full)
            parts_val.append(np.ascontiguousarray(c.val))
            nnz = n_rows
        else:
            parts_idx.append(c.idx.astype(np.int64, copy=False))
            parts_val.append(c.val)
            nnz = c.idx.size
        indptr[j + 1] = indptr[j] + nnz
    indices = np.concatenate(parts_idx) if parts_idx else np.zeros(0, dtype=np.int64)
    data = np.concatenate(parts_val) if parts_val else np.zeros(0)
    return sparse.csc_matrix(
        (data, indices, indptr), shape=(n_rows, len(cols)), copy=False
    )


def build_model_matrix(ds: Dataset, spec: ModelSpec) -> ModelMatrix:
    """Expand the spec's terms over the dataset into a CSC matrix.

    Column order is deterministic: terms in spec order, categorical levels in
    dictionary order, interaction combinations with the left factor varying
    slowest. Dummy encoding drops one reference level per term so the design
    stays full rank; the treatment term drops the configured control arm.
    """
    if ds.n_rows == 0:
        raise DataError("cannot build a model matrix over an empty dataset")
    ds.require(spec.referenced_columns())
    tcol = ds[spec.treatment]
    if tcol.kind != CATEGORICAL:
        raise SpecError(f"treatment column {spec.treatment!r} must be categorical")
    if len(tcol.levels) < 2:
        raise SpecError(f"treatment column {spec.treatment!r} needs at least 2 levels")
    if spec.reference not in tcol.levels:
        raise SpecError(
            f"treatment reference level {spec.reference!r} absent from "
            f"column {spec.treatment!r}"
        )

    cols: list[_Col] = []
    metas: list[ColumnMeta] = []
    bases: list[_Col] = []

    for t_index, term in enumerate(spec.terms):
        if term.kind != INTERACTION:
            for label, level, col in _expand_simple(term, ds, spec):
                metas.append(ColumnMeta(label, t_index, treatment_level=level))
                cols.append(col)
            continue
        expansions = [_expand_simple(f, ds, spec) for f in term.factors]
        for combo in iter_product(*expansions):
            label = "*".join(part[0] for part in combo)
            level = next((part[1] for part in combo if part[1] is not None), None)
            prod = combo[0][2]
            for part in combo[1:]:
                prod = _col_product(prod, part[2])
            basis_index = None
            if level is not None:
                partial = None
                for part in combo:
                    if part[1] is not None:
                        continue
                    partial = (
                        part[2] if partial is None else _col_product(partial, part[2])
                    )
                # Counterfactual delta of this column is the non-treatment
                # partial product (covariates held fixed under reassignment).
                bases.append(partial if partial is not None else _Col(None, np.ones(ds.n_rows)))
                basis_index = len(bases) - 1
            metas.append(ColumnMeta(label, t_index, treatment_level=level, basis_index=basis_index))
            cols.append(prod)

    return ModelMatrix(
        storage=_assemble_csc(cols, ds.n_rows),
        column_meta=tuple(metas),
        dataset_version=ds.version,
        treatment_levels=tcol.levels,
        reference=spec.reference,
        delta_bases=_assemble_csc(bases, ds.n_rows),
    )


def _check_arm(mm: ModelMatrix, arm: str) -> None:
    if arm == mm.reference:
        raise SpecError(f"arm {arm!r} is the reference level; no effect to score")
    if arm not in mm.treatment_levels:
        raise SpecError(
            f"unknown arm {arm!r}; treatment levels are {list(mm.treatment_levels)}"
        )


def _basis_slice(
    mm: ModelMatrix, basis_index: int, start: int, end: int
) -> tuple[NDArray, NDArray]:
    """Stored entries of one delta-basis column restricted to rows [start, end)."""
    bases = mm.delta_bases
    p0, p1 = bases.indptr[basis_index], bases.indptr[basis_index + 1]
    idx = bases.indices[p0:p1]
    lo = np.searchsorted(idx, start)
    hi = np.searchsorted(idx, end)
    return idx[lo:hi], bases.data[p0 + lo : p0 + hi]


def delta_column_means(
    mm: ModelMatrix,
    spec: ModelSpec,
    arm: str,
    rows: tuple[int, int] | None = None,
    weights: NDArray | None = None,
) -> DeltaColumnMeans:
    """Column means of M(X=arm) - M(X=reference) over a row range, analytically.

    The queried arm's dummy column contributes exactly 1; other arms' dummies
    and all non-treatment columns contribute 0; interaction columns owned by
    the arm contribute the mean of their non-treatment partial product. With
    ``weights`` set (compressed rows), means are weighted and ``n_effective``
    is the weighted row count.
    """
    _check_arm(mm, arm)
    start, end = (0, mm.n_rows) if rows is None else rows
    if not 0 <= start < end <= mm.n_rows:
        raise DataError(f"empty or out-of-bounds row range ({start}, {end})")
    if weights is None:
        total = float(end - start)
        n_effective = end - start
    else:
        total = float(weights[start:end].sum())
        n_effective = int(round(total))
    k = np.zeros(mm.n_cols)
    for j, meta in enumerate(mm.column_meta):
        if meta.treatment_level != arm:
            continue
        if meta.basis_index is None:
            k[j] = 1.0
            continue
        idx, val = _basis_slice(mm, meta.basis_index, start, end)
        if weights is None:
            k[j] = val.sum() / total
        else:
            k[j] = (val * weights[idx]).sum() / total
    return DeltaColumnMeans(values=k, n_effective=n_effective)
