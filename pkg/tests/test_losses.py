import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surrogate_policy.errors import DegenerateRiskError, DomainError
from surrogate_policy.losses import (CAP, LOSS_KINDS, SurrogateLoss, eval_loss,
                                     pointwise_surrogate_argmin, surrogate_argmin_array)
from surrogate_policy.oracle import golden_section_argmin

costs = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@pytest.mark.parametrize("kind, expected", [
    ("logistic", (math.log(2), -0.5, 0.25)),
    ("squared", (1.0, -2.0, 2.0)),
    ("exponential", (1.0, -1.0, 1.0)),
])
def test_eval_loss_at_zero(kind, expected):
    assert eval_loss(kind, 0.0) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("t", [math.inf, -math.inf, math.nan])
def test_eval_loss_rejects_non_finite(t):
    with pytest.raises(DomainError):
        eval_loss("logistic", t)


def test_unknown_kind():
    with pytest.raises(DomainError):
        SurrogateLoss("hinge")


@pytest.mark.parametrize("kind", LOSS_KINDS)
def test_convex_with_negative_slope_at_zero(kind):
    loss = SurrogateLoss(kind)
    t = np.linspace(-25, 25, 2001)
    assert np.all(loss.d2(t) > 0)
    assert loss.d1(0.0) < 0


@pytest.mark.parametrize("kind", LOSS_KINDS)
def test_derivatives_match_finite_differences(kind):
    loss = SurrogateLoss(kind)
    t = np.linspace(-4, 4, 41)
    h = 1e-5
    fd1 = (loss.value(t + h) - loss.value(t - h)) / (2 * h)
    fd2 = (loss.d1(t + h) - loss.d1(t - h)) / (2 * h)
    np.testing.assert_allclose(loss.d1(t), fd1, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(loss.d2(t), fd2, rtol=1e-7, atol=1e-9)


def test_logistic_stable_in_the_tails():
    loss = SurrogateLoss("logistic")
    assert loss.value(-800.0) == pytest.approx(800.0)
    assert loss.value(800.0) == 0.0
    assert np.isfinite(loss.d2(800.0))


@pytest.mark.parametrize("kind, c1, c0, expected", [
    ("logistic", 1, 1, 0.0),
    ("logistic", 1, 2, math.log(2)),
    ("squared", 1, 3, 0.5),
    ("exponential", 1, 4, math.log(2)),
])
def test_closed_form_examples(kind, c1, c0, expected):
    assert pointwise_surrogate_argmin(kind, c1, c0) == pytest.approx(expected, abs=1e-15)


def test_zero_cost_saturates():
    assert pointwise_surrogate_argmin("logistic", 0.0, 1.0) == CAP
    assert pointwise_surrogate_argmin("exponential", 1.0, 0.0) == -CAP
    # the squared-loss minimizer stays finite
    assert pointwise_surrogate_argmin("squared", 0.0, 1.0) == 1.0


def test_both_costs_zero():
    with pytest.raises(DegenerateRiskError):
        pointwise_surrogate_argmin("logistic", 0.0, 0.0)
    with pytest.raises(DegenerateRiskError):
        surrogate_argmin_array("logistic", [1.0, 0.0], [1.0, 0.0])


def test_negative_cost():
    with pytest.raises(DomainError):
        pointwise_surrogate_argmin("squared", -1.0, 1.0)


@given(st.sampled_from(LOSS_KINDS), costs, costs)
def test_argmin_matches_golden_section(kind, c1, c0):
    g = pointwise_surrogate_argmin(kind, c1, c0)
    if abs(g) < CAP - 1:
        assert g == pytest.approx(golden_section_argmin(kind, c1, c0), abs=1e-9)


@given(st.sampled_from(LOSS_KINDS), costs, costs)
def test_sign_follows_cost_difference(kind, c1, c0):
    g = pointwise_surrogate_argmin(kind, c1, c0)
    assert np.sign(g) == np.sign(c0 - c1)


@given(st.sampled_from(LOSS_KINDS), costs, costs, st.integers(-10, 10))
def test_power_of_two_scaling_is_exact(kind, c1, c0, e):
    lam = 2.0 ** e
    assert pointwise_surrogate_argmin(kind, lam * c1, lam * c0) == \
        pointwise_surrogate_argmin(kind, c1, c0)


@given(st.sampled_from(LOSS_KINDS), costs, costs,
       st.floats(min_value=1e-3, max_value=1e3))
def test_scaling_invariance(kind, c1, c0, lam):
    assert pointwise_surrogate_argmin(kind, lam * c1, lam * c0) == pytest.approx(
        pointwise_surrogate_argmin(kind, c1, c0), rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("kind", LOSS_KINDS)
def test_array_version_agrees(kind, rng):
    c1 = rng.uniform(0.01, 5, 200)
    c0 = rng.uniform(0.01, 5, 200)
    expected = [pointwise_surrogate_argmin(kind, a, b) for a, b in zip(c1, c0)]
    np.testing.assert_allclose(surrogate_argmin_array(kind, c1, c0), expected, rtol=1e-14)
