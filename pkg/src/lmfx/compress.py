"""Lossless compression of repeated design rows into weighted sufficient rows.

Rows that agree on every design-referenced input column, every extra grouping
key, and the cluster key collapse into one weighted row carrying the per-group
count, per-outcome sums and sums of squares. Weighted OLS over the compressed
rows reproduces the uncompressed fit exactly: the identity
``sum(resid^2) = sum_y2 - 2*yhat*sum_y + n_g*yhat^2`` recovers residual
moments from the sufficient statistics.

Aggregation runs in a canonical row order (grouping keys, outcome values as
tiebreakers), so the compressed dataset is bit-identical no matter how the
input rows were ordered.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .data import NUMERIC, Column, Dataset, contiguous_ranges
from .design import ModelMatrix, ModelSpec
from .errors import SpecError, StaleMatrixError


@dataclass(frozen=True)
class CompressedDataset:
    """Weighted compressed rows plus per-outcome sufficient statistics.

    ``key_columns`` holds, per grouping key, the (constant) value each
    compressed row has for that key; compressed rows are lexsorted by
    ``key_order`` so grouped queries can scan contiguous ranges.
    """

    mm: ModelMatrix
    weights: NDArray
    sum_y: NDArray
    sum_y2: NDArray
    group_membership: NDArray
    key_columns: dict[str, Column]
    key_order: tuple[str, ...]
    outcomes: tuple[str, ...]
    n: int
    cluster_ids: NDArray | None = None
    n_clusters: int = 0

    @property
    def n_groups(self) -> int:
        return self.weights.size

    @property
    def compression_ratio(self) -> float:
        return self.n_groups / self.n

    def outcome_index(self, name: str) -> int:
        try:
            return self.outcomes.index(name)
        except ValueError:
            raise SpecError(
                f"unknown outcome {name!r}; model outcomes are {list(self.outcomes)}"
            ) from None


def _sortable(col: Column) -> NDArray:
    # Codes for categoricals; raw values otherwise. Bitwise equality on these
    # is equivalent to bitwise equality on the expanded design-row values.
    return col.values


def compress(
    ds: Dataset,
    mm: ModelMatrix,
    spec: ModelSpec,
    extra_keys: Sequence[str] = (),
) -> CompressedDataset:
    """Group identical (design row, extra keys, cluster) rows; emit weighted stats.

    ``extra_keys`` must list every column later CATE queries will group by;
    the spec's time and cluster keys are added automatically. Columns already
    referenced by the model terms are implicit grouping keys.
    """
    if mm.dataset_version != ds.version:
        raise StaleMatrixError(
            "model matrix was built from a different dataset version; rebuild it"
        )
    key_order: dict[str, None] = {}
    for name in extra_keys:
        key_order[name] = None
    if spec.time_key:
        key_order[spec.time_key] = None
    if spec.cluster_key:
        key_order[spec.cluster_key] = None
    for name in spec.referenced_columns():
        key_order[name] = None
    keys = tuple(key_order)
    ds.require(keys)

    for name in spec.outcomes:
        if ds[name].kind != NUMERIC:
            raise SpecError(f"outcome {name!r} must be a numeric column")
    y = np.column_stack([ds[name].values for name in spec.outcomes])

    key_arrays = [_sortable(ds[k]) for k in keys]
    # Outcome values break ties so within-group accumulation order is
    # canonical; np.lexsort treats its last key as primary.
    order = np.lexsort(
        [y[:, j] for j in range(y.shape[1] - 1, -1, -1)] + list(reversed(key_arrays))
    )
    sorted_keys = [arr[order] for arr in key_arrays]
    starts, ends = contiguous_ranges(sorted_keys)
    n_groups = starts.size
    reps = order[starts]

    weights = (ends - starts).astype(np.int64)
    y_sorted = y[order]
    sum_y = np.add.reduceat(y_sorted, starts, axis=0)
    sum_y2 = np.add.reduceat(y_sorted * y_sorted, starts, axis=0)

    gid_sorted = np.repeat(np.arange(n_groups), weights)
    membership = np.empty(ds.n_rows, dtype=np.int64)
    membership[order] = gid_sorted

    storage_csr = mm.storage.tocsr()
    bases_csr = mm.delta_bases.tocsr()
    mm_comp = ModelMatrix(
        storage=storage_csr[reps].tocsc(),
        column_meta=mm.column_meta,
        dataset_version=mm.dataset_version,
        treatment_levels=mm.treatment_levels,
        reference=mm.reference,
        # Delta bases are functions of grouping keys, hence constant within a
        # group: the representative row carries the exact group value.
        delta_bases=bases_csr[reps].tocsc(),
    )

    key_columns = {k: ds[k].take(reps) for k in keys}

    cluster_ids = None
    n_clusters = 0
    if spec.cluster_key:
        cluster_vals = key_columns[spec.cluster_key].values
        _, cluster_ids = np.unique(cluster_vals, return_inverse=True)
        n_clusters = int(cluster_ids.max()) + 1 if cluster_ids.size else 0

    return CompressedDataset(
        mm=mm_comp,
        weights=weights,
        sum_y=sum_y,
        sum_y2=sum_y2,
        group_membership=membership,
        key_columns=key_columns,
        key_order=keys,
        outcomes=spec.outcomes,
        n=ds.n_rows,
        cluster_ids=cluster_ids,
        n_clusters=n_clusters,
    )
