"""
Tests for reverse-mode and finite-difference gradients.
"""

import numpy as np
import pytest

from qcsam.gradients import (
    adjoint_gradient,
    finite_difference_gradient,
    sample_gradient,
)
from qcsam.model import QcsamModel
from qcsam.verification import gradient_mismatch
from tests.conftest import random_sample


def assert_gradients_agree(model, rng, label=0):
    params = model.init_params(rng, init_scale=1.0, weight_noise=0.5)
    sample = random_sample(model, rng)
    loss_adj, adj = adjoint_gradient(model, sample, label, params)
    loss_fd, ref = finite_difference_gradient(model, sample, label, params)
    assert loss_adj == pytest.approx(loss_fd)
    assert adj.shape == (model.n_params(),)
    assert gradient_mismatch(adj, ref) <= 1.0


class TestAdjointGradient:
    """Adjoint gradients agree with central differences."""

    def test_two_class_single_head(self, small_model, rng):
        assert_gradients_agree(small_model, rng, label=1)

    def test_three_class_real_overlap(self, rng):
        model = QcsamModel(2, 3, ((1, 2),), attention_mode="real_overlap")
        assert_gradients_agree(model, rng, label=2)

    def test_four_class_ring_topology(self, rng):
        model = QcsamModel(3, 4, ((1, 2),), qfm_topology="ring", qfm_order="ry_zz")
        assert_gradients_agree(model, rng, label=3)

    @pytest.mark.slow
    def test_two_heads_two_layers(self, rng):
        model = QcsamModel(2, 2, ((1, 2), (1, 1)), qfm_layers=2, qffn_layers=2)
        assert_gradients_agree(model, rng, label=0)


class TestGradientDispatch:
    """Test method selection."""

    def test_methods_return_same_loss(self, small_model, rng):
        params = small_model.init_params(rng)
        sample = random_sample(small_model, rng)
        loss_a, _ = sample_gradient(small_model, sample, 0, params, "adjoint")
        loss_f, _ = sample_gradient(small_model, sample, 0, params, "finite_difference")
        assert loss_a == pytest.approx(loss_f)

    def test_unknown_method(self, small_model, rng):
        params = small_model.init_params(rng)
        with pytest.raises(ValueError):
            sample_gradient(small_model, random_sample(small_model, rng), 0, params, "spsa")


class TestMismatchMetric:
    """Test the relative/absolute gradient tolerance."""

    def test_small_relative_error_passes(self):
        ref = np.array([1.0, -2.0, 0.0])
        assert gradient_mismatch(ref * (1 + 5e-5), ref) <= 1.0

    def test_large_error_fails(self):
        ref = np.array([1.0, 0.5])
        assert gradient_mismatch(ref + np.array([0.0, 1e-3]), ref) > 1.0

    def test_absolute_floor_near_zero(self):
        assert gradient_mismatch(np.array([5e-8]), np.array([0.0])) <= 1.0
