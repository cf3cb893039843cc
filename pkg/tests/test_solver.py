import numpy as np
import pandas as pd
import pytest

from lmfx import (
    ModelSpec,
    RankError,
    SpecError,
    build_model_matrix,
    compress,
    fit,
    from_frame,
    group_residual_moments,
)
from lmfx.design import categorical, intercept, numeric

from conftest import (
    analyze_frame,
    basic_spec,
    dense_beta_oracle,
    design_dense,
    random_frame,
)


def test_two_arm_difference_in_means():
    frame = pd.DataFrame(
        {
            "arm": ["C", "C", "T", "T"],
            "y": [0.5, 1.5, 1.0, 2.0],  # means 1.0 and 1.5
        }
    )
    spec = ModelSpec(
        outcomes=("y",),
        treatment="arm",
        reference="C",
        terms=(intercept(), categorical("arm")),
    )
    ds = from_frame(frame, {"arm": "categorical", "y": "numeric"})
    mm = build_model_matrix(ds, spec)
    fm = fit(compress(ds, mm, spec))
    np.testing.assert_allclose(fm.beta[:, 0], [1.0, 0.5], rtol=0, atol=1e-14)


def test_duplicate_column_names_offending_term():
    frame = pd.DataFrame(
        {"arm": ["C", "T", "C", "T"], "w": [1.0, 2.0, 3.0, 4.0], "y": [0.0] * 4}
    )
    spec = ModelSpec(
        outcomes=("y",),
        treatment="arm",
        reference="C",
        terms=(intercept(), categorical("arm"), numeric("w"), numeric("w")),
    )
    ds = from_frame(frame, {"arm": "categorical", "w": "numeric", "y": "numeric"})
    mm = build_model_matrix(ds, spec)
    with pytest.raises(RankError) as err:
        fit(compress(ds, mm, spec))
    assert "w" in str(err.value)
    assert err.value.column_label is not None
    assert err.value.term_index is not None


def test_random_dense_problem_matches_oracle(rng):
    frame = random_frame(
        rng, n=200, arms=3, cat_levels=(3,), n_numeric=2, n_outcomes=3
    )
    spec = basic_spec(
        n_outcomes=3,
        terms=(
            intercept(),
            categorical("arm"),
            categorical("cat0"),
            numeric("w0"),
            numeric("w1"),
        ),
    )
    analysis = analyze_frame(frame, spec)
    assert analysis.fitted.p == 7  # 1 + (3-1) + (3-1) + 2 numerics
    x = design_dense(analysis)
    for j in range(3):
        expected = dense_beta_oracle(x, frame[f"y{j:02d}"].to_numpy())
        np.testing.assert_allclose(
            analysis.fitted.beta[:, j], expected, rtol=1e-9, atol=1e-11
        )


def test_group_moments_perfect_fit_and_spread():
    frame = pd.DataFrame(
        {
            "arm": ["C", "C", "T", "T"],
            "y": [2.0, 2.0, 1.0, 3.0],  # C fits exactly, T has spread around 2
        }
    )
    spec = ModelSpec(
        outcomes=("y",),
        treatment="arm",
        reference="C",
        terms=(intercept(), categorical("arm")),
    )
    ds = from_frame(frame, {"arm": "categorical", "y": "numeric"})
    cd = compress(ds, build_model_matrix(ds, spec), spec)
    fm = fit(cd)
    resid_sum, resid_sq = group_residual_moments(fm, cd, 0)
    assert cd.n_groups == 2
    np.testing.assert_allclose(resid_sum, [0.0, 0.0], atol=1e-12)
    # group order follows sorted arm codes: C first, then T
    np.testing.assert_allclose(resid_sq, [0.0, 2.0], atol=1e-12)


def test_group_moments_match_uncompressed_residuals(rng):
    frame = random_frame(rng, n=1_000, arms=2, cat_levels=(4,), n_numeric=0)
    spec = basic_spec(terms=(intercept(), categorical("arm"), categorical("cat0")))
    analysis = analyze_frame(frame, spec)
    cd, fm = analysis.compressed, analysis.fitted

    x = design_dense(analysis)
    y = frame["y00"].to_numpy()
    beta = dense_beta_oracle(x, y)
    resid = y - x @ beta

    resid_sum, resid_sq = group_residual_moments(fm, cd, 0)
    expect_sum = np.zeros(cd.n_groups)
    expect_sq = np.zeros(cd.n_groups)
    np.add.at(expect_sum, cd.group_membership, resid)
    np.add.at(expect_sq, cd.group_membership, resid * resid)
    np.testing.assert_allclose(resid_sum, expect_sum, rtol=0, atol=1e-10)
    np.testing.assert_allclose(resid_sq, expect_sq, rtol=1e-10, atol=1e-10)


def test_group_moments_outcome_out_of_range(rng):
    frame = random_frame(rng, n=50, arms=2, cat_levels=(2,), n_numeric=0)
    spec = basic_spec(terms=(intercept(), categorical("arm")))
    analysis = analyze_frame(frame, spec)
    with pytest.raises(SpecError):
        group_residual_moments(analysis.fitted, analysis.compressed, 5)


def test_residual_orthogonality(rng):
    frame = random_frame(rng, n=3_000, arms=4, cat_levels=(5,), n_numeric=1)
    spec = basic_spec(
        terms=(intercept(), categorical("arm"), categorical("cat0"), numeric("w0"))
    )
    analysis = analyze_frame(frame, spec)
    cd, fm = analysis.compressed, analysis.fitted
    resid_sum, _ = group_residual_moments(fm, cd, 0)
    # M' W eps with W folded into the grouped residual sums
    score = cd.mm.storage.T @ resid_sum
    assert np.abs(score).max() < 1e-8


def test_rss_and_dof_invariants(rng):
    frame = random_frame(rng, n=500, arms=3, cat_levels=(3,), n_numeric=1, n_outcomes=2)
    spec = basic_spec(
        n_outcomes=2,
        terms=(intercept(), categorical("arm"), categorical("cat0"), numeric("w0")),
    )
    fm = analyze_frame(frame, spec).fitted
    assert fm.n == 500
    assert fm.p == 6  # 1 + (3-1) + (3-1) + 1 numeric
    assert fm.dof == fm.n - fm.p
    assert fm.dof >= 1
    assert np.all(fm.rss >= 0)
    assert fm.rss.shape == (2,)
    assert fm.beta.shape == (6, 2)
    assert fm.xtx_inverse.shape == (6, 6)
    np.testing.assert_allclose(fm.xtx_inverse, fm.xtx_inverse.T, atol=1e-12)


def test_insufficient_rows_rejected():
    frame = pd.DataFrame(
        {"arm": ["C", "T"], "w": [1.0, 2.0], "z": [3.0, 1.0], "y": [0.1, 0.2]}
    )
    spec = ModelSpec(
        outcomes=("y",),
        treatment="arm",
        reference="C",
        terms=(intercept(), categorical("arm"), numeric("w"), numeric("z")),
    )
    schema = {"arm": "categorical", "w": "numeric", "z": "numeric", "y": "numeric"}
    ds = from_frame(frame, schema)
    cd = compress(ds, build_model_matrix(ds, spec), spec)
    with pytest.raises(RankError):
        fit(cd)


def test_collinear_numeric_combination_rejected(rng):
    n = 300
    w = rng.normal(size=n)
    frame = pd.DataFrame(
        {
            "arm": rng.choice(["C", "T"], size=n),
            "w": w,
            "v": 2.0 * w,  # exact linear combination
            "y": rng.normal(size=n),
        }
    )
    spec = ModelSpec(
        outcomes=("y",),
        treatment="arm",
        reference="C",
        terms=(intercept(), categorical("arm"), numeric("w"), numeric("v")),
    )
    schema = {
        "arm": "categorical",
        "w": "numeric",
        "v": "numeric",
        "y": "numeric",
    }
    ds = from_frame(frame, schema)
    cd = compress(ds, build_model_matrix(ds, spec), spec)
    with pytest.raises(RankError):
        fit(cd)


def test_weighted_and_unit_weight_fits_agree(rng):
    frame = random_frame(rng, n=2_000, arms=2, cat_levels=(3,), n_numeric=0)
    spec = basic_spec(terms=(intercept(), categorical("arm"), categorical("cat0")))
    fast = analyze_frame(frame, spec).fitted
    slow = analyze_frame(frame, spec, compression=False).fitted
    np.testing.assert_allclose(fast.beta, slow.beta, rtol=1e-11, atol=1e-13)
