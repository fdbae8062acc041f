"""Tests for Fisher-vector encoding and its normalization."""

import numpy as np
import pytest

from relprop.fisher import (
    MOMENT_MEAN,
    MOMENT_VARIANCE,
    FisherVectorEncoder,
    descriptor_contributions,
    encode_fv,
    fv_index,
    normalize_fv,
)

from helpers import make_gmm


def single_gaussian():
    """K=1 standard normal in 2 dimensions: pi=1, mu=0, sigma=1."""
    return make_gmm(weights=[1.0], means=[[0.0, 0.0]], variances=[[1.0, 1.0]])


def test_fv_index_layout():
    # [mu_0 | sigma_0 | mu_1 | sigma_1 | ...] with D entries per block.
    D = 4
    assert fv_index(0, MOMENT_MEAN, 0, D) == 0
    assert fv_index(0, MOMENT_VARIANCE, 0, D) == 4
    assert fv_index(1, MOMENT_MEAN, 2, D) == 10
    assert fv_index(1, MOMENT_VARIANCE, 3, D) == 15
    seen = {
        fv_index(k, m, i, D)
        for k in range(3)
        for m in (MOMENT_MEAN, MOMENT_VARIANCE)
        for i in range(D)
    }
    assert seen == set(range(2 * 3 * D))


def test_fv_index_validates_arguments():
    with pytest.raises(ValueError, match="moment"):
        fv_index(0, 2, 0, 4)
    with pytest.raises(ValueError, match="dimension 4 out of range"):
        fv_index(0, MOMENT_MEAN, 4, 4)


def test_descriptor_at_the_mean_of_a_single_gaussian():
    # gamma=1, l=mu: the mean statistic vanishes and the variance statistic
    # is (0 - 1)/sqrt(2) = -1/sqrt(2) in every dimension.
    gmm = single_gaussian()
    contrib = descriptor_contributions(gmm, np.zeros((1, 2)))
    expected = np.array([0.0, 0.0, -1.0 / np.sqrt(2.0), -1.0 / np.sqrt(2.0)])
    assert np.max(np.abs(contrib[0] - expected)) <= 1e-12


def test_single_gaussian_statistics_closed_form():
    # l = (3, -1), pi=1, mu=0, sigma=1: psi_mu = l, psi_sigma = (l^2-1)/sqrt(2).
    gmm = single_gaussian()
    fv = encode_fv(gmm, np.array([[3.0, -1.0]]))
    expected = np.array([3.0, -1.0, 8.0 / np.sqrt(2.0), 0.0])
    assert np.allclose(fv, expected, atol=1e-12)


def test_two_component_contributions_match_hand_formula():
    # K=2, D=1, mu = 0 and 2, unit variances, equal weights, query at 0.
    gmm = make_gmm(weights=[0.5, 0.5], means=[[0.0], [2.0]], variances=[[1.0], [1.0]])
    gamma0 = 1.0 / (1.0 + np.exp(-2.0))
    gamma1 = 1.0 - gamma0
    contrib = descriptor_contributions(gmm, np.array([[0.0]]))[0]
    expected = np.array(
        [
            gamma0 / np.sqrt(0.5) * 0.0,
            gamma0 / np.sqrt(1.0) * (0.0 - 1.0),
            gamma1 / np.sqrt(0.5) * (0.0 - 2.0),
            gamma1 / np.sqrt(1.0) * (4.0 - 1.0),
        ]
    )
    assert np.allclose(contrib, expected, atol=1e-14)


def test_nonunit_variance_scales_the_statistics():
    # sigma^2 = 4: psi_mu = (l-mu)/2, psi_sigma = ((l-mu)^2/4 - 1)/sqrt(2).
    gmm = make_gmm(weights=[1.0], means=[[1.0]], variances=[[4.0]])
    fv = encode_fv(gmm, np.array([[5.0]]))
    assert np.allclose(fv, [2.0, 3.0 / np.sqrt(2.0)], atol=1e-13)


def test_encode_is_the_sum_of_contributions():
    rng = np.random.default_rng(0)
    gmm = make_gmm(
        weights=[0.3, 0.7],
        means=rng.normal(size=(2, 3)),
        variances=rng.uniform(0.5, 2.0, size=(2, 3)),
    )
    descriptors = rng.normal(size=(6, 3))
    contrib = descriptor_contributions(gmm, descriptors)
    assert contrib.shape == (6, 12)
    assert np.allclose(encode_fv(gmm, descriptors), contrib.sum(axis=0), atol=1e-12)


def test_contributions_match_per_descriptor_loop():
    rng = np.random.default_rng(1)
    gmm = make_gmm(
        weights=[0.2, 0.5, 0.3],
        means=rng.normal(size=(3, 2)),
        variances=rng.uniform(0.5, 2.0, size=(3, 2)),
    )
    descriptors = rng.normal(size=(4, 2))
    contrib = descriptor_contributions(gmm, descriptors)
    post = gmm.predict_proba(descriptors)
    for l in range(4):
        for k in range(3):
            sigma = np.sqrt(gmm.variances_[k])
            centered = (descriptors[l] - gmm.means_[k]) / sigma
            mu_part = post[l, k] / np.sqrt(gmm.weights_[k]) * centered
            var_part = (
                post[l, k] / np.sqrt(2.0 * gmm.weights_[k]) * (centered ** 2 - 1.0)
            )
            for i in range(2):
                assert contrib[l, fv_index(k, MOMENT_MEAN, i, 2)] == pytest.approx(
                    mu_part[i], abs=1e-14
                )
                assert contrib[l, fv_index(k, MOMENT_VARIANCE, i, 2)] == pytest.approx(
                    var_part[i], abs=1e-14
                )


def test_dimension_mismatch_rejected():
    gmm = single_gaussian()
    with pytest.raises(ValueError, match="GMM expects 2"):
        descriptor_contributions(gmm, np.zeros((3, 5)))


def test_empty_descriptor_set_rejected():
    with pytest.raises(ValueError, match="empty descriptor set"):
        encode_fv(single_gaussian(), np.zeros((0, 2)))


def test_normalize_signed_square_root_and_l2():
    fv = np.array([4.0, -9.0, 0.0, 1.0])
    rooted = np.array([2.0, -3.0, 0.0, 1.0])
    expected = rooted / np.sqrt(14.0)
    assert np.allclose(normalize_fv(fv), expected, atol=1e-15)
    assert abs(np.linalg.norm(normalize_fv(fv)) - 1.0) <= 1e-12


def test_normalize_preserves_signs_and_zero_vector():
    fv = np.array([-2.0, 5.0, -0.25])
    out = normalize_fv(fv)
    assert np.array_equal(np.sign(out), np.sign(fv))
    assert np.array_equal(normalize_fv(np.zeros(6)), np.zeros(6))


def test_encoder_facade_matches_functions():
    rng = np.random.default_rng(2)
    gmm = make_gmm(
        weights=[0.4, 0.6],
        means=rng.normal(size=(2, 3)),
        variances=rng.uniform(0.5, 1.5, size=(2, 3)),
    )
    descriptors = rng.normal(size=(5, 3))
    raw = FisherVectorEncoder(gmm, normalize=False).fit().transform(descriptors)
    scored = FisherVectorEncoder(gmm).fit().transform(descriptors)
    assert np.array_equal(raw, encode_fv(gmm, descriptors))
    assert np.array_equal(scored, normalize_fv(encode_fv(gmm, descriptors)))
    assert FisherVectorEncoder(gmm).get_params()["normalize"] is True


def test_encoding_is_additive_over_descriptor_sets():
    rng = np.random.default_rng(3)
    gmm = make_gmm(
        weights=[0.5, 0.5],
        means=rng.normal(size=(2, 3)),
        variances=rng.uniform(0.5, 2.0, size=(2, 3)),
    )
    first = rng.normal(size=(3, 3))
    second = rng.normal(size=(4, 3))
    combined = encode_fv(gmm, np.vstack([first, second]))
    assert np.allclose(
        combined, encode_fv(gmm, first) + encode_fv(gmm, second), atol=1e-12
    )
