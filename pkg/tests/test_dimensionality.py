import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dmax_brute, mle_brute, stability_rhs

from subalign import (
    InvalidInputError,
    LabeledDataset,
    StabilityBoundParams,
    compute_dmax,
    fit_alignment_mle,
    mle_intrinsic_dim,
    select_dim_cv,
    zscore,
)
from subalign.datasets import make_synthetic_shift
from subalign.dimensionality import sample_norm_bound, stability_threshold
from subalign.linalg import eigen_spectrum

PARAMS = StabilityBoundParams(gamma=1e5, delta=0.1, b_norm=1.0)


def test_threshold_matches_term_by_term_oracle():
    for d in (1, 2, 7):
        assert stability_threshold(d, 50, PARAMS) == pytest.approx(stability_rhs(d, 50, 1e5, 0.1, 1.0))


def test_enormous_gaps_give_full_width():
    eigs = 10.0 ** np.arange(12, 0, -1)
    assert compute_dmax(eigs, eigs, 100, 100, PARAMS) == len(eigs) - 1


def test_flat_spectrum_warns_and_falls_back_to_one():
    with pytest.warns(UserWarning):
        assert compute_dmax(np.ones(5), np.ones(5), 100, 100, PARAMS) == 1


def test_shorter_spectrum_sets_the_limit():
    eigs = 10.0 ** np.arange(12, 0, -1)
    assert compute_dmax(eigs, eigs[:4], 100, 100, PARAMS) == 3


def test_ascending_spectrum_is_rejected():
    with pytest.raises(InvalidInputError):
        compute_dmax([1.0, 2.0, 3.0], [3.0, 2.0, 1.0], 10, 10, PARAMS)


def test_non_positive_counts_are_rejected():
    with pytest.raises(InvalidInputError):
        compute_dmax([3.0, 2.0], [3.0, 2.0], 0, 10, PARAMS)


@pytest.mark.parametrize("field, value", [("gamma", 0.0), ("delta", 1.5), ("b_norm", -1.0)])
def test_bound_params_are_validated(field, value):
    kwargs = dict(gamma=1.0, delta=0.1, b_norm=1.0)
    kwargs[field] = value
    with pytest.raises(InvalidInputError):
        StabilityBoundParams(**kwargs)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.0, 50.0), min_size=2, max_size=12),
    st.lists(st.floats(0.0, 50.0), min_size=2, max_size=12),
    st.floats(1.0, 1e5),
    st.integers(2, 500),
)
def test_dmax_matches_brute_force(src, tgt, gamma, n):
    s, t = np.sort(src)[::-1], np.sort(tgt)[::-1]
    params = StabilityBoundParams(gamma=gamma, delta=0.1, b_norm=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        got = compute_dmax(s, t, n, n, params)
    assert got == dmax_brute(list(s), list(t), n, n, gamma, 0.1, 1.0)
    assert 1 <= got <= max(1, min(len(s), len(t)) - 1)


def test_sample_norm_bound_is_max_row_norm():
    assert sample_norm_bound(np.array([[3.0, 4.0]]), np.array([[1.0, 0.0], [0.0, 6.0]])) == 6.0


def _separable_source(rng):
    labels = np.repeat([0, 1], 20)
    x = rng.standard_normal((40, 6)) * 0.05
    x[:, 0] += np.where(labels == 0, -5.0, 5.0)
    return LabeledDataset(x, labels)


def test_cv_picks_one_for_one_dimensional_separation(rng):
    src = _separable_source(rng)
    sel = select_dim_cv(src, src.features + 0.01 * rng.standard_normal((40, 6)), d_max=4)
    assert sel.d_star == 1
    assert sel.cv_errors[0] == 0.0
    assert sel.cv_errors.shape == (4,)


def test_cv_with_single_width(rng):
    src = _separable_source(rng)
    assert select_dim_cv(src, src.features, d_max=1).d_star == 1


def test_cv_is_deterministic(rng):
    s, t = make_synthetic_shift(classes=3, n_per_class=15, dim=12, signal_dim=3, seed=4)
    a = select_dim_cv(s, t.features, 6, seed=2)
    b = select_dim_cv(s, t.features, 6, seed=2)
    assert a.d_star == b.d_star and np.array_equal(a.cv_errors, b.cv_errors)


def test_cv_rejects_bad_arguments(rng):
    src = _separable_source(rng)
    with pytest.raises(InvalidInputError):
        select_dim_cv(src.features, src.features, 2)
    with pytest.raises(InvalidInputError):
        select_dim_cv(src, src.features, 0)


@pytest.mark.parametrize("seed", range(10))
def test_bound_then_cv_lands_in_a_sensible_range(seed):
    s, t = make_synthetic_shift(classes=8, n_per_class=25, seed=seed)
    zs, _ = zscore(s.features)
    zt, _ = zscore(t.features)
    params = StabilityBoundParams(gamma=1e4, delta=0.1, b_norm=sample_norm_bound(zs, zt))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d_max = compute_dmax(eigen_spectrum(zs), eigen_spectrum(zt), len(zs), len(zt), params)
    sel = select_dim_cv(LabeledDataset(zs, s.labels), zt, min(d_max, len(zs) - 1), seed=seed)
    assert 3 <= sel.d_star <= 8


def test_mle_on_filled_square(rng):
    pts = np.hstack([rng.uniform(size=(1000, 2)), np.zeros((1000, 3))])
    assert mle_intrinsic_dim(pts)[0] in (2, 3)


def test_mle_on_a_line(rng):
    pts = np.outer(rng.uniform(size=500), rng.standard_normal(6))
    assert mle_intrinsic_dim(pts)[0] in (1, 2)


def test_mle_matches_loop_oracle(rng):
    pts = rng.standard_normal((60, 4))
    _, d_raw = mle_intrinsic_dim(pts)
    assert d_raw == pytest.approx(mle_brute(pts), rel=1e-10)


def test_mle_skips_rows_without_neighbours(rng):
    pts = np.vstack([rng.standard_normal((30, 3)) * 0.1, [[100.0, 0.0, 0.0]]])
    _, d_raw, pointwise = mle_intrinsic_dim(pts, return_pointwise=True)
    assert np.isnan(pointwise[-1])
    assert d_raw == pytest.approx(np.nanmean(pointwise))


def test_mle_is_isometry_invariant(rng):
    pts = rng.standard_normal((80, 5))
    rot, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    a = mle_intrinsic_dim(pts)[1]
    b = mle_intrinsic_dim(pts @ rot + 7.0)[1]
    assert abs(a - b) < 1e-6


def test_mle_needs_ten_rows():
    with pytest.raises(InvalidInputError):
        mle_intrinsic_dim(np.eye(9))


def test_mle_rejects_identical_rows():
    with pytest.raises(InvalidInputError):
        mle_intrinsic_dim(np.ones((20, 3)))


def test_mle_alignment_identical_domains_is_square(rng):
    x = rng.standard_normal((100, 4)) @ rng.standard_normal((4, 12))
    model = fit_alignment_mle(x, x)
    assert model.m_matrix.shape[0] == model.m_matrix.shape[1]
    np.testing.assert_allclose(model.m_matrix, np.eye(model.m_matrix.shape[0]), atol=1e-8)


def test_mle_alignment_follows_each_domain(rng):
    from test_acceptance import torus

    model = fit_alignment_mle(torus(2, 400, 30, rng), torus(5, 400, 30, rng))
    assert model.d_s < model.d_t
