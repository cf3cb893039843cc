import numpy as np
import pandas as pd
import pytest

from lmfx import (
    CovarianceType,
    ModelSpec,
    SpecError,
    build_model_matrix,
    compress,
    cov_beta,
    fit,
    from_frame,
)
from lmfx.design import categorical, intercept, numeric

from conftest import (
    analyze_frame,
    basic_spec,
    dense_beta_oracle,
    design_dense,
    max_rel_diff,
    random_frame,
    sandwich_oracle,
)

ALL_TYPES = (
    CovarianceType.HOMOSKEDASTIC,
    CovarianceType.HC0,
    CovarianceType.HC1,
)


def _fit_with_oracle(rng, n, arms=2, cat_levels=(3,), n_clusters=0, n_numeric=1,
                     heteroskedastic=False):
    frame = random_frame(
        rng,
        n=n,
        arms=arms,
        cat_levels=cat_levels,
        n_numeric=n_numeric,
        n_clusters=n_clusters,
        heteroskedastic=heteroskedastic,
    )
    terms = [intercept(), categorical("arm"), categorical("cat0")]
    terms += [numeric(f"w{j}") for j in range(n_numeric)]
    spec = basic_spec(
        terms=tuple(terms), cluster_key="cluster" if n_clusters else None
    )
    analysis = analyze_frame(frame, spec)
    x = design_dense(analysis)
    y = frame["y00"].to_numpy()
    resid = y - x @ dense_beta_oracle(x, y)
    clusters = (
        pd.factorize(frame["cluster"])[1].get_indexer(frame["cluster"])
        if n_clusters
        else None
    )
    if n_clusters:
        clusters = pd.factorize(frame["cluster"])[0]
    return analysis, x, resid, clusters


def test_parse_accepts_known_names_and_rejects_garbage():
    assert CovarianceType.parse("hc1") is CovarianceType.HC1
    assert CovarianceType.parse("HC0") is CovarianceType.HC0
    assert CovarianceType.parse("homoskedastic") is CovarianceType.HOMOSKEDASTIC
    assert CovarianceType.parse("cr1") is CovarianceType.CR1
    with pytest.raises(SpecError):
        CovarianceType.parse("hc9")


def test_perfect_fit_gives_zero_covariance():
    frame = pd.DataFrame({"arm": ["C", "C", "T", "T"], "y": [1.0, 1.0, 2.0, 2.0]})
    spec = ModelSpec(
        outcomes=("y",),
        treatment="arm",
        reference="C",
        terms=(intercept(), categorical("arm")),
    )
    ds = from_frame(frame, {"arm": "categorical", "y": "numeric"})
    cd = compress(ds, build_model_matrix(ds, spec), spec)
    fm = fit(cd)
    for ct in ALL_TYPES:
        np.testing.assert_allclose(cov_beta(fm, cd, 0, ct), 0.0, atol=1e-14)


def test_homoskedastic_generator_hc0_agrees(rng):
    analysis, _, _, _ = _fit_with_oracle(rng, n=10_000, n_numeric=0)
    cd, fm = analysis.compressed, analysis.fitted
    se_homo = np.sqrt(
        np.diag(cov_beta(fm, cd, 0, CovarianceType.HOMOSKEDASTIC))
    )
    se_hc0 = np.sqrt(np.diag(cov_beta(fm, cd, 0, CovarianceType.HC0)))
    ratio = se_hc0 / se_homo
    assert np.all(ratio > 0.9) and np.all(ratio < 1.1)


def test_hc0_matches_dense_sandwich_oracle(rng):
    analysis, x, resid, _ = _fit_with_oracle(rng, n=300, arms=2, n_numeric=2)
    cd, fm = analysis.compressed, analysis.fitted
    got = cov_beta(fm, cd, 0, CovarianceType.HC0)
    expected = sandwich_oracle(x, resid, "hc0")
    assert max_rel_diff(got, expected) < 1e-8


def test_all_variants_match_dense_oracles(rng):
    """300 random problems x 4 covariance types against per-row oracles."""
    worst = 0.0
    for trial in range(300):
        n = int(rng.integers(60, 400))
        arms = int(rng.integers(2, 4))
        n_clusters = int(rng.integers(5, 20))
        analysis, x, resid, clusters = _fit_with_oracle(
            rng,
            n=n,
            arms=arms,
            n_clusters=n_clusters,
            n_numeric=int(rng.integers(0, 2)),
            heteroskedastic=bool(rng.integers(0, 2)),
        )
        cd, fm = analysis.compressed, analysis.fitted
        for ct, kind in (
            (CovarianceType.HOMOSKEDASTIC, "homoskedastic"),
            (CovarianceType.HC0, "hc0"),
            (CovarianceType.HC1, "hc1"),
            (CovarianceType.CR1, "cr1"),
        ):
            got = cov_beta(fm, cd, 0, ct)
            expected = sandwich_oracle(x, resid, kind, clusters=clusters)
            worst = max(worst, max_rel_diff(got, expected))
    assert worst < 1e-8, f"worst relative covariance error {worst:.3e}"


def test_beta_is_bitwise_identical_across_variants(rng):
    analysis, _, _, _ = _fit_with_oracle(rng, n=800, n_clusters=12)
    cd, fm = analysis.compressed, analysis.fitted
    before = fm.beta.copy()
    for ct in ALL_TYPES + (CovarianceType.CR1,):
        cov_beta(fm, cd, 0, ct)
        np.testing.assert_array_equal(fm.beta, before)


def test_symmetry_and_nonnegative_diagonal(rng):
    analysis, _, _, _ = _fit_with_oracle(
        rng, n=600, arms=3, n_clusters=10, heteroskedastic=True
    )
    cd, fm = analysis.compressed, analysis.fitted
    for ct in ALL_TYPES + (CovarianceType.CR1,):
        cov = cov_beta(fm, cd, 0, ct)
        assert np.abs(cov - cov.T).max() < 1e-10
        assert np.all(np.diag(cov) >= 0)


def test_cr1_with_singleton_clusters_matches_hc1_scaling(rng):
    """Every row its own cluster: CR1 == HC0 x (n/(n-1)) x adj == HC1-scaled form."""
    n = 240
    frame = random_frame(rng, n=n, arms=2, cat_levels=(3,), n_numeric=0)
    frame["cluster"] = [f"r{i:04d}" for i in range(n)]
    spec = basic_spec(
        terms=(intercept(), categorical("arm"), categorical("cat0")),
        cluster_key="cluster",
    )
    analysis = analyze_frame(frame, spec)
    cd, fm = analysis.compressed, analysis.fitted
    hc0 = cov_beta(fm, cd, 0, CovarianceType.HC0)
    cr1 = cov_beta(fm, cd, 0, CovarianceType.CR1)
    p = fm.p
    c_adj = (n / (n - 1)) * ((n - 1) / (n - p))
    np.testing.assert_allclose(cr1, hc0 * c_adj, rtol=1e-12, atol=1e-18)


def test_hc1_is_hc0_times_small_sample_factor(rng):
    analysis, _, _, _ = _fit_with_oracle(rng, n=150, heteroskedastic=True)
    cd, fm = analysis.compressed, analysis.fitted
    hc0 = cov_beta(fm, cd, 0, CovarianceType.HC0)
    hc1 = cov_beta(fm, cd, 0, CovarianceType.HC1)
    factor = fm.n / (fm.n - fm.p)
    np.testing.assert_allclose(hc1, hc0 * factor, rtol=1e-13, atol=1e-18)


def test_cache_insertion_is_idempotent(rng):
    analysis, _, _, _ = _fit_with_oracle(rng, n=200)
    cd, fm = analysis.compressed, analysis.fitted
    first = cov_beta(fm, cd, 0, CovarianceType.HC0)
    second = cov_beta(fm, cd, 0, CovarianceType.HC0)
    assert first is second  # served from the write-once cache


def test_cr1_requires_cluster_key(rng):
    analysis, _, _, _ = _fit_with_oracle(rng, n=100)
    with pytest.raises(SpecError, match="cluster"):
        cov_beta(analysis.fitted, analysis.compressed, 0, CovarianceType.CR1)


def test_cr1_requires_two_clusters(rng):
    frame = random_frame(rng, n=80, arms=2, cat_levels=(2,), n_numeric=0)
    frame["cluster"] = "only"
    spec = basic_spec(
        terms=(intercept(), categorical("arm"), categorical("cat0")),
        cluster_key="cluster",
    )
    analysis = analyze_frame(frame, spec)
    with pytest.raises(SpecError, match="cluster"):
        cov_beta(analysis.fitted, analysis.compressed, 0, CovarianceType.CR1)


def test_outcome_out_of_range(rng):
    analysis, _, _, _ = _fit_with_oracle(rng, n=100)
    with pytest.raises(SpecError):
        cov_beta(analysis.fitted, analysis.compressed, 3, CovarianceType.HC0)
