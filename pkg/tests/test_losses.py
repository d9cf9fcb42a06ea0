"""Tests for softmax cross-entropy and smooth-L1."""
import math

import numpy as np
import pytest

from face_rfcn.errors import ShapeError
from face_rfcn.ops.losses import smooth_l1, softmax, softmax_ce, softmax_ce_per_sample

from . import oracles


class TestSoftmaxCE:
    """Cross-entropy loss and gradient."""

    def test_uniform_logits(self):
        loss, _ = softmax_ce(np.zeros((4, 2)), [0, 1, 1, 0])
        assert loss == pytest.approx(math.log(2))

    def test_saturated(self):
        logits = np.array([[1000.0, 0.0], [0.0, 1000.0]])
        loss, grad = softmax_ce(logits, [0, 1])
        assert loss == pytest.approx(0.0, abs=1e-12)
        assert np.isfinite(grad).all()

    @pytest.mark.parametrize("seed", range(20))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(8, 3))
        labels = rng.integers(0, 3, size=8)
        _, grad = softmax_ce(logits, labels)
        numeric = oracles.numerical_gradient(lambda: softmax_ce(logits, labels)[0], logits)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-9)

    def test_per_sample_mean(self, rng):
        logits = rng.normal(size=(6, 2))
        labels = rng.integers(0, 2, size=6)
        assert softmax_ce_per_sample(logits, labels).mean() == pytest.approx(
            softmax_ce(logits, labels)[0]
        )

    def test_out_of_range_label(self):
        with pytest.raises(ValueError):
            softmax_ce(np.zeros((2, 2)), [0, 2])

    def test_label_count_mismatch(self):
        with pytest.raises(ShapeError):
            softmax_ce(np.zeros((2, 2)), [0])

    def test_empty(self):
        loss, grad = softmax_ce(np.zeros((0, 2)), [])
        assert loss == 0.0 and grad.shape == (0, 2)

    def test_softmax_rows_sum_to_one(self, rng):
        probs = softmax(rng.normal(size=(5, 3)) * 50)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)


class TestSmoothL1:
    """Piecewise regression loss."""

    def test_equal_is_zero(self, rng):
        pred = rng.normal(size=(3, 4))
        loss, grad = smooth_l1(pred, pred.copy())
        assert loss == 0.0 and not grad.any()

    def test_linear_branch(self):
        loss, grad = smooth_l1(np.array([[2.0, 0, 0, 0]]), np.zeros((1, 4)))
        assert loss == 1.5
        assert grad.tolist() == [[1.0, 0.0, 0.0, 0.0]]

    def test_quadratic_branch(self):
        loss, grad = smooth_l1(np.array([[0.5, 0, 0, 0]]), np.zeros((1, 4)))
        assert loss == 0.125
        assert grad.tolist() == [[0.5, 0.0, 0.0, 0.0]]

    def test_averaged_over_boxes(self):
        pred = np.array([[2.0, 0, 0, 0], [0.5, 0, 0, 0]])
        loss, _ = smooth_l1(pred, np.zeros((2, 4)))
        assert loss == pytest.approx((1.5 + 0.125) / 2)

    def test_empty(self):
        loss, grad = smooth_l1(np.zeros((0, 4)), np.zeros((0, 4)))
        assert loss == 0.0 and grad.shape == (0, 4)

    @pytest.mark.parametrize("seed", range(20))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        pred = rng.normal(scale=1.5, size=(5, 4))
        target = rng.normal(size=(5, 4))
        _, grad = smooth_l1(pred, target)
        numeric = oracles.numerical_gradient(lambda: smooth_l1(pred, target)[0], pred, eps=1e-6)
        np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-8)
