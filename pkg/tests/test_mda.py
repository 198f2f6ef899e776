import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overspec_mda.errors import InvalidArgumentError
from overspec_mda.mda import (
    LabeledDataset,
    MdaModel,
    bayes_risk,
    class_log_densities,
    classify,
    decision_function,
    estimate_error,
    estimate_excess_risk,
    estimate_mu,
    fit_mda,
    generate_labeled,
    tv_gap_estimate,
)
from overspec_mda.mixture import MixtureParams, kl_vs_standard_normal
from overspec_mda.numerics import gauss_hermite_rule, rng_stream, stream_id

MU = np.array([1.0, 0.0])
THETA0 = [0.2, 0.05]


def test_dataset_validation():
    with pytest.raises(InvalidArgumentError):
        LabeledDataset(np.zeros((3, 2)), [1, -1, 0])
    with pytest.raises(InvalidArgumentError):
        LabeledDataset(np.zeros((3, 2)), [1, -1])
    with pytest.raises(InvalidArgumentError):
        LabeledDataset(np.zeros((1, 2)), [1])


def test_generate_labeled_moments():
    n = 100_000
    ds = generate_labeled([0.5, -1.0], n, rng_stream(1))
    assert abs(ds.labels.mean()) < 4 / math.sqrt(n)
    assert np.linalg.norm(estimate_mu(ds) - [0.5, -1.0]) < 4 * math.sqrt(2 / n)
    pure = generate_labeled([0.0, 0.0], n, rng_stream(2))
    np.testing.assert_allclose(pure.features.var(axis=0), 1.0, atol=0.02)


def test_estimate_mu_identities():
    x = rng_stream(3).normal((50, 3))
    ones = LabeledDataset(x, np.ones(50))
    np.testing.assert_allclose(estimate_mu(ones), x.mean(axis=0))
    flipped = LabeledDataset(x, -np.ones(50))
    np.testing.assert_allclose(estimate_mu(flipped), -x.mean(axis=0))


def test_mu_hat_error_is_chi_square():
    n, d = 10_000, 2
    vals = []
    for s in range(50):
        ds = generate_labeled(MU, n, rng_stream(4, stream_id(s)))
        vals.append(n * np.sum((estimate_mu(ds) - MU) ** 2))
    assert d * 0.5 <= np.mean(vals) <= d * 1.5


def test_fit_mda_on_null_data_shrinks():
    norms = []
    for n in (1000, 100_000):
        ds = generate_labeled([0.0, 0.0], n, rng_stream(5, stream_id(n % 32768)))
        model, _ = fit_mda(ds, THETA0)
        assert np.linalg.norm(model.mu_hat) < 5 / math.sqrt(n)
        norms.append(model.mixture.theta_norm)
    assert norms[1] < norms[0]


def test_fit_mda_deterministic_and_variance_band():
    ds = generate_labeled(MU, 10_000, rng_stream(6))
    a, _ = fit_mda(ds, THETA0)
    b, _ = fit_mda(ds, THETA0)
    np.testing.assert_array_equal(a.mixture.theta, b.mixture.theta)
    assert 0.8 < a.mixture.sigma_sq < 1.1


def test_lda_limit_and_ties():
    model = MdaModel.lda([1.0, -0.5])
    x = rng_stream(7).normal((500, 2))
    expected = np.where(x @ model.mu_hat > 0, 1, -1)
    np.testing.assert_array_equal(classify(model, x), expected)
    assert classify(model, np.zeros(2)) == -1
    np.testing.assert_allclose(decision_function(model, x), 2 * x @ model.mu_hat, atol=1e-12)


def test_classify_far_from_origin_no_underflow():
    model = MdaModel(np.array([1.0, 0.0]), MixtureParams([0.3, 0.1], 0.9, 0.8))
    far = np.array([[1e4, 3.0], [-1e4, 3.0]])
    np.testing.assert_array_equal(classify(model, far), [1, -1])
    plus, minus = class_log_densities(model, far)
    assert np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))


def test_classify_dimension_check():
    with pytest.raises(InvalidArgumentError):
        classify(MdaModel.lda([1.0, 0.0]), np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        MdaModel(np.zeros(3), MixtureParams([0.0, 0.0], 1.0, 0.8))


@given(
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    st.lists(st.floats(-0.3, 0.3), min_size=2, max_size=2),
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
)
@settings(max_examples=200, deadline=None)
def test_decision_symmetries(mu_hat, theta, x):
    mix = MixtureParams(theta, 0.9, 0.8)
    flip = MixtureParams(-np.array(theta), 0.9, 0.8)
    mu_hat, x = np.array(mu_hat), np.array(x)
    base = decision_function(MdaModel(mu_hat, mix), x)
    # negating mu_hat swaps the two class densities
    assert decision_function(MdaModel(-mu_hat, mix), x) == pytest.approx(-base, abs=1e-9)
    # reflecting x and theta together also swaps them
    assert decision_function(MdaModel(mu_hat, flip), -x) == pytest.approx(-base, abs=1e-9)
    # reflecting x and mu_hat together changes nothing
    assert decision_function(MdaModel(-mu_hat, flip), -x) == pytest.approx(base, abs=1e-9)


def test_bayes_risk():
    assert bayes_risk(0.0) == 0.5
    assert bayes_risk(1.0) == pytest.approx(0.15865525393145707, abs=1e-15)
    vals = [bayes_risk(t) for t in np.linspace(0, 8, 50)]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(InvalidArgumentError):
        bayes_risk(-1.0)


def test_error_estimates():
    rate, half = estimate_error(MdaModel.lda([6.0, 0.0]), [6.0, 0.0], 100_000, rng_stream(8))
    assert rate < 1e-4 + half
    rate, half = estimate_error(MdaModel.lda([0.0, 0.0]), [0.0, 0.0], 100_000, rng_stream(9))
    assert abs(rate - 0.5) <= half
    rate, half = estimate_error(MdaModel.lda(MU), MU, 200_000, rng_stream(10))
    assert abs(rate - bayes_risk(1.0)) <= half
    with pytest.raises(InvalidArgumentError):
        estimate_error(MdaModel.lda(MU), MU, 100, rng_stream(10))


def test_error_estimate_deterministic():
    model = MdaModel(MU, MixtureParams([0.1, 0.0], 0.95, 0.8))
    assert estimate_error(model, MU, 5000, rng_stream(11)) == estimate_error(model, MU, 5000, rng_stream(11))


def test_excess_risk_estimator():
    # the Bayes classifier has zero excess; a rotated LDA has a closed-form excess
    value, se = estimate_excess_risk(MdaModel.lda(MU), MU, 50_000, rng_stream(12))
    assert value == 0.0 and se == 0.0
    angle = 0.4
    model = MdaModel.lda([math.cos(angle), math.sin(angle)])
    # error of sign(w.x) with unit w at angle a from mu: Phi(-|mu| cos a)
    exact = bayes_risk(math.cos(angle)) - bayes_risk(1.0)
    value, se = estimate_excess_risk(model, MU, 400_000, rng_stream(13))
    assert abs(value - exact) < 4 * se
    naive, half = estimate_error(model, MU, 400_000, rng_stream(13))
    assert abs((naive - bayes_risk(1.0)) - exact) < half
    assert se < half / 1.96


def test_tv_gap():
    model = MdaModel.lda(MU)
    value, se = tv_gap_estimate(model, MU, 1, 20_000, rng_stream(14))
    assert value == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        tv_gap_estimate(model, MU, 0, 20_000, rng_stream(14))
    with pytest.raises(InvalidArgumentError):
        tv_gap_estimate(model, MU, 1, 100, rng_stream(14))


@pytest.mark.parametrize("sign", [1, -1])
def test_tv_gap_pinsker(sign):
    mix = MixtureParams([0.3, 0.1], 0.95, 0.8)
    model = MdaModel(MU, mix)
    value, se = tv_gap_estimate(model, MU, sign, 200_000, rng_stream(15, stream_id(sign + 1)))
    kl = kl_vs_standard_normal(mix, gauss_hermite_rule())
    assert value >= -1e-12
    assert value <= math.sqrt(kl / 2) + 3 * se
    assert value > 0.01


def test_excess_sandwich_on_fitted_model():
    ds = generate_labeled(MU, 2000, rng_stream(16))
    model, _ = fit_mda(ds, THETA0)
    ex, ex_se = estimate_excess_risk(model, MU, 100_000, rng_stream(17))
    tp, tp_se = tv_gap_estimate(model, MU, 1, 100_000, rng_stream(18))
    tm, tm_se = tv_gap_estimate(model, MU, -1, 100_000, rng_stream(19))
    assert ex <= tp + tm + 3 * math.sqrt(ex_se**2 + tp_se**2 + tm_se**2)
