"""Weighted multiresponse OLS over compressed sparse designs.

Solves (M'WM) beta = M' sum_y by Cholesky factorization of the Gram matrix,
one factorization shared by every outcome. The n-dependent products run in
sparse algebra; the p x p Gram is permuted with a fill-reducing (reverse
Cuthill-McKee) ordering, factored with LAPACK, and kept around so covariance
work can reuse both the factor and the materialized inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import lapack
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .compress import CompressedDataset
from .errors import RankError, SpecError

# A Cholesky pivot (squared) below this fraction of the largest Gram diagonal
# marks the design as numerically rank deficient.
PIVOT_RTOL = 1e-10


@dataclass
class FittedModel:
    """Coefficients plus the cached factorization artifacts every query reuses."""

    beta: NDArray
    xtx_inverse: NDArray
    cholesky_factor: NDArray
    permutation: NDArray
    per_group_fit: NDArray
    rss: NDArray
    dof: int
    n: int
    p: int
    covariance_cache: dict = field(default_factory=dict)

    def solve_gram(self, rhs: NDArray) -> NDArray:
        """Apply (M'WM)^-1 to ``rhs`` via the stored Cholesky factor."""
        b = rhs[self.permutation]
        out, info = lapack.dpotrs(self.cholesky_factor, b, lower=1)
        if info != 0:
            raise RankError(f"triangular solve failed (LAPACK info={info})")
        unpermuted = np.empty_like(out)
        unpermuted[self.permutation] = out
        return unpermuted


def _rank_failure(mm_meta, perm: NDArray, local_index: int) -> RankError:
    col = int(perm[local_index])
    meta = mm_meta[col]
    return RankError(
        f"design matrix is rank deficient at column {col} "
        f"({meta.label!r}, term {meta.term_index}); "
        "remove or merge the collinear term",
        column_label=meta.label,
        term_index=meta.term_index,
    )


def fit(cd: CompressedDataset) -> FittedModel:
    """Fit one weighted multiresponse OLS model over the compressed rows.

    Rank deficiency is a hard error naming the offending column; silently
    dropping columns would change what the coefficients estimate.
    """
    mm = cd.mm
    m_csc = mm.storage
    G, p = m_csc.shape
    if G < p:
        raise RankError(
            f"insufficient rows: {G} distinct design rows for {p} parameters"
        )
    w = cd.weights.astype(np.float64)

    weighted = m_csc.multiply(w[:, None]).tocsc()
    gram_sp = (m_csc.T @ weighted).tocsr()
    rhs = np.asarray(m_csc.T @ cd.sum_y)
    if rhs.ndim == 1:
        rhs = rhs[:, None]

    perm = np.asarray(
        reverse_cuthill_mckee(gram_sp, symmetric_mode=True), dtype=np.int64
    )
    gram = gram_sp.toarray()
    gram_perm = gram[np.ix_(perm, perm)]

    factor, info = lapack.dpotrf(gram_perm, lower=1, overwrite_a=False)
    if info > 0:
        raise _rank_failure(mm.column_meta, perm, info - 1)
    if info < 0:
        raise RankError(f"Cholesky factorization failed (LAPACK info={info})")
    pivots_sq = np.diag(factor) ** 2
    max_diag = float(gram.diagonal().max()) if p else 0.0
    bad = np.flatnonzero(pivots_sq < PIVOT_RTOL * max_diag)
    if bad.size:
        raise _rank_failure(mm.column_meta, perm, int(bad[0]))

    beta_perm, info = lapack.dpotrs(factor, rhs[perm], lower=1)
    if info != 0:
        raise RankError(f"triangular solve failed (LAPACK info={info})")
    beta = np.empty_like(beta_perm)
    beta[perm] = beta_perm

    inv_perm, info = lapack.dpotri(factor, lower=1)
    if info != 0:
        raise RankError(f"Gram inversion failed (LAPACK info={info})")
    inv_perm = np.tril(inv_perm) + np.tril(inv_perm, -1).T
    xtx_inverse = np.empty((p, p))
    xtx_inverse[np.ix_(perm, perm)] = inv_perm

    per_group_fit = np.asarray(m_csc @ beta)
    rss = np.maximum(
        (cd.sum_y2 - 2.0 * per_group_fit * cd.sum_y + w[:, None] * per_group_fit**2).sum(
            axis=0
        ),
        0.0,
    )

    n = cd.n
    dof = n - p
    if dof < 1:
        raise RankError(f"no residual degrees of freedom: n={n}, p={p}")

    return FittedModel(
        beta=beta,
        xtx_inverse=xtx_inverse,
        cholesky_factor=factor,
        permutation=perm,
        per_group_fit=per_group_fit,
        rss=rss,
        dof=dof,
        n=n,
        p=p,
    )


def group_residual_moments(
    fm: FittedModel, cd: CompressedDataset, outcome: int
) -> tuple[NDArray, NDArray]:
    """Per-group residual sum and residual sum of squares, exactly.

    sum(resid) = sum_y - n_g * yhat and sum(resid^2) follows from the
    sufficient statistics; both equal the uncompressed per-row sums.
    """
    if not 0 <= outcome < len(cd.outcomes):
        raise SpecError(f"outcome index {outcome} out of range")
    w = cd.weights.astype(np.float64)
    yhat = fm.per_group_fit[:, outcome]
    sy = cd.sum_y[:, outcome]
    sy2 = cd.sum_y2[:, outcome]
    resid_sum = sy - w * yhat
    resid_sq = np.maximum(sy2 - 2.0 * yhat * sy + w * yhat**2, 0.0)
    return resid_sum, resid_sq
