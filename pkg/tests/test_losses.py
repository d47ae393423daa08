import math

import numpy as np
import numpy.testing as npt
import pytest

from tpctrack.nncore import (
    binary_cross_entropy,
    categorical_cross_entropy,
    l2_penalty,
    regularized_loss,
)


def test_perfect_predictions_zero_loss():
    y = np.array([1.0, 0.0, 1.0]).reshape(-1, 1)
    assert binary_cross_entropy(y, y) < 1e-10


def test_hand_evaluated_binary_loss():
    # m=2, y=(1,0), yhat=(0.8,0.4): J = -1/2 (ln 0.8 + ln 0.6)
    yhat = np.array([[0.8], [0.4]])
    y = np.array([[1.0], [0.0]])
    expected = -0.5 * (math.log(0.8) + math.log(0.6))
    npt.assert_allclose(binary_cross_entropy(yhat, y), expected, rtol=1e-12)
    assert abs(expected - 0.3670) < 5e-5


def test_zero_lambda_equals_plain_loss():
    rng = np.random.default_rng(0)
    yhat = rng.uniform(0.05, 0.95, (10, 1))
    y = rng.integers(0, 2, (10, 1)).astype(float)
    weights = [rng.standard_normal((4, 4))]
    assert regularized_loss("bce", yhat, y, weights, 0.0) == \
        binary_cross_entropy(yhat, y)


def test_l2_penalty_value():
    w = [np.array([[1.0, 2.0], [3.0, 0.0]])]
    assert l2_penalty(w, lam=2.0, m=4) == pytest.approx(2.0 / 8.0 * 14.0)


def test_categorical_loss_on_one_hot():
    yhat = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1]])
    y = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    expected = -(math.log(0.7) + math.log(0.8)) / 2.0
    npt.assert_allclose(categorical_cross_entropy(yhat, y), expected, rtol=1e-12)


def test_clipping_keeps_loss_finite():
    yhat = np.array([[0.0], [1.0]])
    y = np.array([[1.0], [0.0]])
    assert math.isfinite(binary_cross_entropy(yhat, y))


def test_empty_batch_raises():
    with pytest.raises(ValueError):
        binary_cross_entropy(np.zeros((0, 1)), np.zeros((0, 1)))
