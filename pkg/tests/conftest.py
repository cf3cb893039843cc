"""Shared fixtures and independent oracles.

The oracle functions below are written directly from the textbook formulas —
dense per-row linear algebra, explicit loops where that is the clearest
transcription — and deliberately share no code with the engine. Tests compare
the engine's compressed sparse fast paths against these.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from lmfx import ModelSpec, analyze_dataset, derive_schema, from_frame
from lmfx.design import categorical, intercept

# ------------------------------------------------------------------ oracles


def dense_beta_oracle(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via dense lstsq (QR/SVD under the hood)."""
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    return beta


def pooled_t_oracle(y_treat: np.ndarray, y_control: np.ndarray) -> tuple[float, float]:
    """Two-sample difference in means and pooled-variance t-test SE."""
    nt, nc = len(y_treat), len(y_control)
    diff = y_treat.mean() - y_control.mean()
    ss = ((y_treat - y_treat.mean()) ** 2).sum() + (
        (y_control - y_control.mean()) ** 2
    ).sum()
    s2 = ss / (nt + nc - 2)
    se = float(np.sqrt(s2 * (1.0 / nt + 1.0 / nc)))
    return float(diff), se


def sandwich_oracle(
    x: np.ndarray,
    resid: np.ndarray,
    kind: str,
    clusters: np.ndarray | None = None,
) -> np.ndarray:
    """Per-row covariance estimators, transcribed literally.

    homoskedastic: s^2 (X'X)^-1 with s^2 = rss/(n-p).
    hc0/hc1: (X'X)^-1 [sum_i x_i x_i' e_i^2] (X'X)^-1 (hc1 scales by n/(n-p)).
    cr1: scores summed within cluster, with the usual small-sample factor.
    """
    n, p = x.shape
    bread = np.linalg.inv(x.T @ x)
    if kind == "homoskedastic":
        return float(resid @ resid) / (n - p) * bread
    meat = np.zeros((p, p))
    if kind in ("hc0", "hc1"):
        for i in range(n):
            meat += np.outer(x[i], x[i]) * resid[i] ** 2
        cov = bread @ meat @ bread
        if kind == "hc1":
            cov = cov * (n / (n - p))
        return cov
    if kind == "cr1":
        labels = np.unique(clusters)
        for c in labels:
            rows = clusters == c
            score = x[rows].T @ resid[rows]
            meat += np.outer(score, score)
        n_clusters = len(labels)
        adj = (n_clusters / (n_clusters - 1)) * ((n - 1) / (n - p))
        return adj * (bread @ meat @ bread)
    raise ValueError(kind)


def hash_grouping_oracle(arrays: list[np.ndarray]) -> dict[tuple, list[int]]:
    """Row indices per key tuple via a plain dict — no sorting involved."""
    out: dict[tuple, list[int]] = {}
    for i in range(len(arrays[0])):
        key = tuple(a[i] for a in arrays)
        out.setdefault(key, []).append(i)
    return out


def max_rel_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Max-norm relative difference, safe when the reference is tiny."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


# ----------------------------------------------------------- data builders


def arm_labels(arms: int) -> list[str]:
    return ["control"] + [f"arm{i:02d}" for i in range(1, arms)]


def random_frame(
    rng: np.random.Generator,
    n: int,
    arms: int = 2,
    cat_levels: int | tuple[int, ...] = (3,),
    n_numeric: int = 1,
    n_outcomes: int = 1,
    n_clusters: int = 0,
    periods: int = 1,
    heteroskedastic: bool = False,
) -> pd.DataFrame:
    """Random experiment table with every (arm, categorical-cell) populated.

    The first block of rows enumerates all arm x category combinations so
    saturated interaction designs stay full rank at small n.
    """
    if isinstance(cat_levels, int):
        cat_levels = (cat_levels,)
    arms_list = arm_labels(arms)
    arm_idx = rng.integers(0, arms, size=n)
    cat_idx = [rng.integers(0, k, size=n) for k in cat_levels]

    fill = 0
    for a in range(arms):
        for combo in np.ndindex(*cat_levels) if cat_levels else [()]:
            if fill >= n:
                break
            arm_idx[fill] = a
            for c, lev in enumerate(combo):
                cat_idx[c][fill] = lev
            fill += 1

    data: dict[str, np.ndarray] = {
        "arm": np.asarray(arms_list, dtype=object)[arm_idx]
    }
    for c, k in enumerate(cat_levels):
        labels = np.asarray([f"g{c}_{v:02d}" for v in range(k)], dtype=object)
        data[f"cat{c}"] = labels[cat_idx[c]]
    for j in range(n_numeric):
        data[f"w{j}"] = rng.normal(0.0, 1.0, size=n)
    if n_clusters:
        labels = np.asarray(
            [f"c{v:03d}" for v in range(n_clusters)], dtype=object
        )
        data["cluster"] = labels[rng.integers(0, n_clusters, size=n)]
    if periods > 1:
        data["period"] = rng.integers(0, periods, size=n)

    scale = np.ones(n)
    if heteroskedastic:
        scale = 0.3 + rng.uniform(0.0, 2.0, size=n)
    for j in range(n_outcomes):
        signal = 0.4 * arm_idx + rng.normal(0.0, 0.2)
        for c in range(len(cat_levels)):
            signal = signal + 0.3 * cat_idx[c]
        for k in range(n_numeric):
            signal = signal + 0.5 * data[f"w{k}"]
        data[f"y{j:02d}"] = signal + rng.normal(0.0, 1.0, size=n) * scale
    return pd.DataFrame(data)


def basic_spec(
    n_outcomes: int = 1,
    terms=None,
    cluster_key: str | None = None,
    time_key: str | None = None,
) -> ModelSpec:
    if terms is None:
        terms = (intercept(), categorical("arm"))
    return ModelSpec(
        outcomes=tuple(f"y{j:02d}" for j in range(n_outcomes)),
        treatment="arm",
        reference="control",
        terms=tuple(terms),
        cluster_key=cluster_key,
        time_key=time_key,
    )


def analyze_frame(
    frame: pd.DataFrame,
    spec: ModelSpec,
    extra_keys: tuple[str, ...] = (),
    compression: bool = True,
):
    """from_frame + analyze_dataset with schema derived from the spec."""
    overrides = {
        c: "numeric"
        for c in frame.columns
        if c.startswith("w") and c in frame.columns
    }
    if "period" in frame.columns:
        overrides["period"] = "key"
    schema = derive_schema(spec, extra_keys, overrides)
    ds = from_frame(frame, schema)
    return analyze_dataset(ds, spec, extra_keys=extra_keys, compression=compression)


def design_dense(analysis) -> np.ndarray:
    """The uncompressed dense design matrix, rebuilt from the raw dataset."""
    from lmfx import build_model_matrix

    return np.asarray(
        build_model_matrix(analysis.dataset, analysis.spec).storage.todense()
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


__all__ = [
    "analyze_frame",
    "arm_labels",
    "basic_spec",
    "dense_beta_oracle",
    "design_dense",
    "hash_grouping_oracle",
    "max_rel_diff",
    "pooled_t_oracle",
    "random_frame",
    "sandwich_oracle",
]
