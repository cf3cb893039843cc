"""Covariance estimators for the fitted coefficients.

Homoskedastic, heteroskedasticity-robust (HC0/HC1), and cluster-robust (CR1)
covariances, all computed from compressed sufficient statistics behind one
interface. Robust "meat" matrices are exact under compression because the
per-group residual moments are exact; switching estimator never touches the
point estimates.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from numpy.typing import NDArray
from scipy import sparse

from .compress import CompressedDataset
from .errors import SpecError
from .solver import FittedModel, group_residual_moments


class CovarianceType(str, Enum):
    HOMOSKEDASTIC = "homoskedastic"
    HC0 = "hc0"
    HC1 = "hc1"
    CR1 = "cr1"

    @classmethod
    def parse(cls, value: "CovarianceType | str") -> "CovarianceType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise SpecError(
                f"unknown covariance type {value!r}; "
                f"choose from {[m.value for m in cls]}"
            ) from None


def _sandwich(xtx_inv: NDArray, meat: NDArray) -> NDArray:
    cov = xtx_inv @ meat @ xtx_inv
    return (cov + cov.T) / 2.0


def cov_beta(
    fm: FittedModel,
    cd: CompressedDataset,
    outcome: int,
    ct: CovarianceType | str,
) -> NDArray:
    """Covariance of the coefficient vector for one outcome under ``ct``.

    Results are cached on the fitted model per (type, outcome); recomputation
    is idempotent so concurrent fills are harmless.
    """
    ct = CovarianceType.parse(ct)
    if not 0 <= outcome < len(cd.outcomes):
        raise SpecError(f"outcome index {outcome} out of range")
    key = (ct, outcome)
    cached = fm.covariance_cache.get(key)
    if cached is not None:
        return cached

    if ct == CovarianceType.HOMOSKEDASTIC:
        sigma2 = fm.rss[outcome] / fm.dof
        cov = sigma2 * fm.xtx_inverse
        cov = (cov + cov.T) / 2.0
    elif ct in (CovarianceType.HC0, CovarianceType.HC1):
        _, resid_sq = group_residual_moments(fm, cd, outcome)
        m_csc = cd.mm.storage
        meat = np.asarray((m_csc.T @ m_csc.multiply(resid_sq[:, None])).todense())
        cov = _sandwich(fm.xtx_inverse, meat)
        if ct == CovarianceType.HC1:
            cov = cov * (fm.n / (fm.n - fm.p))
    else:
        if cd.cluster_ids is None:
            raise SpecError(
                "cluster-robust covariance requires a cluster_key in the model spec"
            )
        n_clusters = cd.n_clusters
        if n_clusters < 2:
            raise SpecError(
                f"cluster-robust covariance needs at least 2 clusters, got {n_clusters}"
            )
        resid_sum, _ = group_residual_moments(fm, cd, outcome)
        scores_rows = cd.mm.storage.multiply(resid_sum[:, None]).tocsr()
        agg = sparse.csr_matrix(
            (
                np.ones(cd.n_groups),
                (cd.cluster_ids, np.arange(cd.n_groups)),
            ),
            shape=(n_clusters, cd.n_groups),
        )
        cluster_scores = agg @ scores_rows
        meat = np.asarray((cluster_scores.T @ cluster_scores).todense())
        adj = (n_clusters / (n_clusters - 1)) * ((fm.n - 1) / (fm.n - fm.p))
        cov = _sandwich(fm.xtx_inverse, meat) * adj

    fm.covariance_cache[key] = cov
    return cov
