# ABOUTME: Tests for the masked training losses
# ABOUTME: Known values, gradients against finite differences, and mask handling

import numpy as np
import pytest

from edgesched.exceptions import InvalidArgumentError, ShapeError
from edgesched.nn.losses import bce, loss, mse


class TestMse:
    """Test masked mean squared error."""

    def test_zero_for_exact_prediction(self):
        pred = np.array([[0.2, 0.4, 0.9]])
        value, grad = mse(pred, pred.copy(), np.ones((1, 3), dtype=bool))
        assert value == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_broadcasts_position_mask_over_outputs(self):
        pred = np.zeros((1, 2, 3))
        target = np.ones((1, 2, 3))
        value, grad = mse(pred, target, np.array([[True, False]]))
        assert value == 1.0
        np.testing.assert_array_equal(grad[0, 1], 0.0)

    def test_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(0)
        pred, target = rng.random((2, 4)), rng.random((2, 4))
        mask = np.array([[True, True, False, True], [True, False, False, False]])
        _, grad = mse(pred, target, mask)
        eps = 1e-6
        up, down = pred.copy(), pred.copy()
        up[0, 1] += eps
        down[0, 1] -= eps
        numeric = (mse(up, target, mask)[0] - mse(down, target, mask)[0]) / (2 * eps)
        assert numeric == pytest.approx(grad[0, 1], rel=1e-6, abs=1e-9)


class TestBce:
    """Test masked binary cross-entropy."""

    def test_half_probability_gives_ln2(self):
        value, _ = bce(np.full((1, 4), 0.5), np.array([[0.0, 1.0, 0.0, 1.0]]), np.ones((1, 4)))
        assert value == pytest.approx(np.log(2.0))

    def test_pad_values_do_not_matter(self):
        target = np.array([[1.0, 0.0, 0.0]])
        mask = np.array([[True, True, False]])
        a, _ = bce(np.array([[0.9, 0.2, 0.5]]), target, mask)
        b, grad = bce(np.array([[0.9, 0.2, 0.999]]), target, mask)
        assert a == b
        assert grad[0, 2] == 0.0

    def test_saturated_prediction_stays_finite(self):
        value, grad = bce(np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]]), np.ones((1, 2)))
        assert np.isfinite(value) and np.all(np.isfinite(grad))


class TestMaskErrors:
    """Test invalid masks and shapes."""

    def test_empty_mask(self):
        with pytest.raises(InvalidArgumentError):
            mse(np.zeros((1, 3)), np.zeros((1, 3)), np.zeros((1, 3), dtype=bool))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            bce(np.zeros((1, 3)), np.zeros((1, 4)), np.ones((1, 3)))

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            loss("huber", np.zeros((1, 1)), np.zeros((1, 1)), np.ones((1, 1)))
