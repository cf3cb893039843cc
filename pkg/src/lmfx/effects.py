"""Treatment-effect queries answered by counterfactual scoring.

Every estimate flows through the same four steps: form the column means K of
the counterfactual design difference dM over the rows in scope, contract with
the fitted coefficients for the point estimate, contract with Cov(beta) for
the variance, and attach confidence bounds. ATE is the single-segment case,
CATE partitions the compressed rows by grouping keys, and DTE is CATE over
the time key. The counterfactual matrices themselves are never materialized
outside :func:`reference_path_effects`, which exists precisely to be slow,
literal, and independently checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from .compress import CompressedDataset
from .covariance import CovarianceType, cov_beta
from .data import CATEGORICAL, Column, Dataset, contiguous_ranges
from .design import (
    ModelSpec,
    _check_arm,
    build_model_matrix,
    delta_column_means,
)
from .errors import DataError, GroupKeyError, SpecError
from .solver import FittedModel

ARM_BOTH = "both"
ARM_TREATED_ONLY = "treated_only"
ARM_CONTROL_ONLY = "control_only"
ARM_NEITHER = "neither"

# Above this row count z quantiles replace Student-t; the difference is far
# below reporting precision and the switch keeps tiny problems honest.
_NORMAL_APPROX_N = 100

_REFERENCE_PATH_MAX_ROWS = 1_000_000


@dataclass(frozen=True)
class EffectQuery:
    """One question: which arm, which outcome, sliced how, under which errors."""

    outcome: str
    arm: str
    grouping: tuple[str, ...] = ()
    covariance: CovarianceType = CovarianceType.HOMOSKEDASTIC
    confidence_level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "grouping", tuple(self.grouping))
        object.__setattr__(
            self, "covariance", CovarianceType.parse(self.covariance)
        )
        if not 0.0 < self.confidence_level < 1.0:
            raise SpecError(
                f"confidence level must be in (0, 1), got {self.confidence_level}"
            )
        if len(set(self.grouping)) != len(self.grouping):
            raise SpecError("grouping columns must be distinct")


@dataclass(frozen=True)
class EffectEstimate:
    """One effect cell: point estimate, uncertainty, and provenance."""

    outcome: str
    arm: str
    estimate: float
    std_error: float
    statistic: float
    p_value: float
    ci_low: float
    ci_high: float
    n_group: int
    group_key: tuple = ()
    arm_support: str = ARM_BOTH
    covariance: CovarianceType = CovarianceType.HOMOSKEDASTIC

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "arm": self.arm,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_group": self.n_group,
            "group_key": list(self.group_key),
            "arm_support": self.arm_support,
            "covariance": self.covariance.value,
        }


def _inference(
    estimate: float, variance: float, n: int, dof: int, level: float
) -> tuple[float, float, float, float, float]:
    """Standard error, statistic, p-value, and CI bounds for one cell.

    Uses the normal approximation once n reaches 100 and Student-t with the
    model's residual degrees of freedom below that.
    """
    se = float(np.sqrt(max(variance, 0.0)))
    if n >= _NORMAL_APPROX_N:
        dist = stats.norm
    else:
        dist = stats.t(df=max(dof, 1))
    if se > 0.0:
        statistic = estimate / se
        p_value = float(2.0 * dist.sf(abs(statistic)))
    else:
        statistic = 0.0 if estimate == 0.0 else float(np.sign(estimate)) * np.inf
        p_value = 1.0 if estimate == 0.0 else 0.0
    crit = float(dist.ppf(1.0 - (1.0 - level) / 2.0))
    return se, statistic, p_value, estimate - crit * se, estimate + crit * se


def _support_flag(any_treated: bool, any_control: bool) -> str:
    if any_treated and any_control:
        return ARM_BOTH
    if any_treated:
        return ARM_TREATED_ONLY
    if any_control:
        return ARM_CONTROL_ONLY
    return ARM_NEITHER


def _treatment_codes(
    cd: CompressedDataset, spec: ModelSpec, arm: str
) -> tuple[NDArray, int, int]:
    """Per-compressed-row treatment codes plus the arm and reference codes."""
    tcol = cd.key_columns[spec.treatment]
    return (
        tcol.values,
        tcol.levels.index(arm),
        tcol.levels.index(spec.reference),
    )


@dataclass
class _Segment:
    """One contiguous or gathered slice of compressed rows to score."""

    group_key: tuple
    span: tuple[int, int] | None = None
    rows: NDArray | None = None


def _evaluate_segments(
    fm: FittedModel,
    cd: CompressedDataset,
    spec: ModelSpec,
    q: EffectQuery,
    segments: Sequence[_Segment],
) -> list[EffectEstimate]:
    """Score every segment against one coefficient vector and one covariance.

    Contiguous segments take the indexed fast path through
    :func:`delta_column_means`; gathered segments (grouping keys that are not
    in compressed sort order) densify the handful of delta-basis columns once
    and reduce per segment. Cov(beta) is computed once and reused throughout.
    """
    mm = cd.mm
    _check_arm(mm, q.arm)
    j = cd.outcome_index(q.outcome)
    beta_j = fm.beta[:, j]
    cov = cov_beta(fm, cd, j, q.covariance)
    tcodes, arm_code, ref_code = _treatment_codes(cd, spec, q.arm)
    weights = cd.weights

    need_gather = any(seg.rows is not None for seg in segments)
    dense_bases: dict[int, NDArray] = {}
    if need_gather:
        for col, meta in enumerate(mm.column_meta):
            if meta.treatment_level == q.arm and meta.basis_index is not None:
                dense_bases[col] = np.asarray(
                    mm.delta_bases[:, meta.basis_index].todense()
                ).ravel()

    out: list[EffectEstimate] = []
    for seg in segments:
        if seg.rows is None:
            start, end = seg.span
            dcm = delta_column_means(
                mm, spec, q.arm, rows=(start, end), weights=weights
            )
            k = dcm.values
            n_group = dcm.n_effective
            seg_codes = tcodes[start:end]
        else:
            rows = seg.rows
            w = weights[rows]
            total = float(w.sum())
            k = np.zeros(mm.n_cols)
            for col, meta in enumerate(mm.column_meta):
                if meta.treatment_level != q.arm:
                    continue
                if meta.basis_index is None:
                    k[col] = 1.0
                else:
                    k[col] = float(dense_bases[col][rows] @ w) / total
            n_group = int(round(total))
            seg_codes = tcodes[rows]
        estimate = float(k @ beta_j)
        variance = float(k @ cov @ k)
        se, statistic, p_value, lo, hi = _inference(
            estimate, variance, fm.n, fm.dof, q.confidence_level
        )
        out.append(
            EffectEstimate(
                outcome=q.outcome,
                arm=q.arm,
                estimate=estimate,
                std_error=se,
                statistic=statistic,
                p_value=p_value,
                ci_low=lo,
                ci_high=hi,
                n_group=n_group,
                group_key=seg.group_key,
                arm_support=_support_flag(
                    bool((seg_codes == arm_code).any()),
                    bool((seg_codes == ref_code).any()),
                ),
                covariance=q.covariance,
            )
        )
    return out


def ate(
    fm: FittedModel, cd: CompressedDataset, spec: ModelSpec, q: EffectQuery
) -> EffectEstimate:
    """Average treatment effect of ``q.arm`` versus the reference arm.

    K is the weighted column-mean vector of dM over all rows; the estimate is
    K beta and the variance K Cov(beta) K'.
    """
    if q.grouping:
        raise SpecError("ate() takes a query without grouping; use cate()")
    whole = _Segment(group_key=(), span=(0, cd.n_groups))
    return _evaluate_segments(fm, cd, spec, q, [whole])[0]


def _lexicographically_sorted(arrays: Sequence[NDArray]) -> bool:
    n = len(arrays[0])
    if n <= 1:
        return True
    lt = np.zeros(n - 1, dtype=bool)
    gt = np.zeros(n - 1, dtype=bool)
    for arr in arrays:
        undecided = ~(lt | gt)
        if not undecided.any():
            break
        a, b = arr[:-1], arr[1:]
        lt |= undecided & (a < b)
        gt |= undecided & (a > b)
    return not gt.any()


def _decode_at(col: Column, row: int):
    if col.kind == CATEGORICAL:
        return col.levels[col.values[row]]
    return col.values[row].item()


def cate(
    fm: FittedModel, cd: CompressedDataset, spec: ModelSpec, q: EffectQuery
) -> list[EffectEstimate]:
    """Conditional ATEs: one estimate per distinct grouping-key combination.

    Grouping columns must have been compression keys, otherwise compressed
    rows straddle group boundaries and no aggregation can recover the cells.
    Rows already in grouping order are swept in place; otherwise the group
    codes are argsorted first (the compressed table itself is never reordered).
    """
    if not q.grouping:
        return [ate(fm, cd, spec, q)]
    missing = [g for g in q.grouping if g not in cd.key_columns]
    if missing:
        raise GroupKeyError(
            f"grouping column {missing[0]!r} was not a compression key, so "
            f"compressed rows straddle its boundaries; re-run compression "
            f"with it included. Available keys: {list(cd.key_order)}"
        )
    cols = [cd.key_columns[g] for g in q.grouping]
    arrays = [c.values for c in cols]

    if _lexicographically_sorted(arrays):
        starts, ends = contiguous_ranges(arrays)
        segments = [
            _Segment(
                group_key=tuple(_decode_at(c, int(s)) for c in cols),
                span=(int(s), int(e)),
            )
            for s, e in zip(starts, ends)
        ]
    else:
        order = np.lexsort(tuple(arrays[::-1]))
        starts, ends = contiguous_ranges([a[order] for a in arrays])
        segments = [
            _Segment(
                group_key=tuple(_decode_at(c, int(order[s])) for c in cols),
                rows=order[s:e],
            )
            for s, e in zip(starts, ends)
        ]
    return _evaluate_segments(fm, cd, spec, q, segments)


def dte(
    fm: FittedModel, cd: CompressedDataset, spec: ModelSpec, q: EffectQuery
) -> list[EffectEstimate]:
    """Dynamic treatment effect: the CATE path grouped by the time key."""
    if spec.time_key is None:
        raise SpecError("dte() requires a model spec with a time_key")
    return cate(fm, cd, spec, replace(q, grouping=(spec.time_key,)))


def _constant_treatment(ds: Dataset, spec: ModelSpec, level: str) -> Dataset:
    """Copy of the dataset with every row assigned to one treatment arm."""
    tcol = ds[spec.treatment]
    code = tcol.levels.index(level)
    forced = Column(
        CATEGORICAL,
        np.full(ds.n_rows, code, dtype=tcol.values.dtype),
        tcol.levels,
    )
    columns = dict(ds.columns)
    columns[spec.treatment] = forced
    return Dataset(columns=columns, n_rows=ds.n_rows, sort_state=())


def _dense_covariance(
    m: NDArray,
    resid: NDArray,
    xtx_inv: NDArray,
    ct: CovarianceType,
    cluster_codes: NDArray | None,
) -> NDArray:
    n, p = m.shape
    if ct == CovarianceType.HOMOSKEDASTIC:
        return float(resid @ resid) / (n - p) * xtx_inv
    if ct in (CovarianceType.HC0, CovarianceType.HC1):
        meat = m.T @ (m * (resid**2)[:, None])
        cov = xtx_inv @ meat @ xtx_inv
        if ct == CovarianceType.HC1:
            cov *= n / (n - p)
        return cov
    if cluster_codes is None:
        raise SpecError(
            "cluster-robust covariance requires a cluster_key in the model spec"
        )
    codes, inverse = np.unique(cluster_codes, return_inverse=True)
    n_clusters = len(codes)
    if n_clusters < 2:
        raise SpecError(
            f"cluster-robust covariance needs at least 2 clusters, got {n_clusters}"
        )
    scores = np.zeros((n_clusters, p))
    np.add.at(scores, inverse, m * resid[:, None])
    meat = scores.T @ scores
    adj = (n_clusters / (n_clusters - 1)) * ((n - 1) / (n - p))
    return adj * (xtx_inv @ meat @ xtx_inv)


def reference_path_effects(
    ds: Dataset, spec: ModelSpec, q: EffectQuery
) -> list[EffectEstimate]:
    """The literal, unoptimized estimator: materialize everything, then average.

    Builds the factual design, fits it densely by least squares, constructs
    full counterfactual matrices M(arm) and M(reference) from reassigned
    copies of the data, forms dM and the per-row scores dyhat = dM beta, and
    averages over each requested cell. Per-row sandwich covariances are
    computed densely. This path shares no arithmetic with the fast engine and
    is what tests and ``--verify`` compare against; it refuses datasets too
    large to hold densely.
    """
    if ds.n_rows > _REFERENCE_PATH_MAX_ROWS:
        raise SpecError(
            f"reference path materializes dense matrices; refusing "
            f"{ds.n_rows} rows (limit {_REFERENCE_PATH_MAX_ROWS})"
        )
    mm = build_model_matrix(ds, spec)
    _check_arm(mm, q.arm)
    if q.outcome not in spec.outcomes:
        raise SpecError(f"unknown outcome {q.outcome!r}")
    j = spec.outcomes.index(q.outcome)

    m = np.asarray(mm.storage.todense())
    n, p = m.shape
    if n <= p:
        raise DataError(f"{n} rows cannot identify {p} coefficients")
    y = np.asarray(ds[q.outcome].values, dtype=float)
    beta, *_ = np.linalg.lstsq(m, y, rcond=None)
    resid = y - m @ beta
    xtx_inv = np.linalg.inv(m.T @ m)

    m_treat = np.asarray(
        build_model_matrix(_constant_treatment(ds, spec, q.arm), spec)
        .storage.todense()
    )
    m_control = np.asarray(
        build_model_matrix(_constant_treatment(ds, spec, spec.reference), spec)
        .storage.todense()
    )
    delta_m = m_treat - m_control
    delta_yhat = delta_m @ beta

    cluster_codes = (
        ds[spec.cluster_key].values if spec.cluster_key is not None else None
    )
    cov = _dense_covariance(m, resid, xtx_inv, q.covariance, cluster_codes)

    tcodes = ds[spec.treatment].values
    tlevels = ds[spec.treatment].levels
    arm_code = tlevels.index(q.arm)
    ref_code = tlevels.index(spec.reference)

    if q.grouping:
        ds.require(q.grouping)
        cols = [ds[g] for g in q.grouping]
        arrays = [c.values for c in cols]
        order = np.lexsort(tuple(arrays[::-1]))
        starts, ends = contiguous_ranges([a[order] for a in arrays])
        cells = [
            (tuple(_decode_at(c, int(order[s])) for c in cols), order[s:e])
            for s, e in zip(starts, ends)
        ]
    else:
        cells = [((), np.arange(n))]

    out = []
    for group_key, rows in cells:
        estimate = float(delta_yhat[rows].mean())
        k = delta_m[rows].mean(axis=0)
        variance = float(k @ cov @ k)
        se, statistic, p_value, lo, hi = _inference(
            estimate, variance, n, n - p, q.confidence_level
        )
        seg_codes = tcodes[rows]
        out.append(
            EffectEstimate(
                outcome=q.outcome,
                arm=q.arm,
                estimate=estimate,
                std_error=se,
                statistic=statistic,
                p_value=p_value,
                ci_low=lo,
                ci_high=hi,
                n_group=int(rows.size),
                group_key=group_key,
                arm_support=_support_flag(
                    bool((seg_codes == arm_code).any()),
                    bool((seg_codes == ref_code).any()),
                ),
                covariance=q.covariance,
            )
        )
    return out
