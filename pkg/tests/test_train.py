"""
Tests for Adam, batch gradients, evaluation and seeded training runs.
"""

import numpy as np
import pytest

from qcsam.data import PreparedSample, fit_pipeline, prepare_set, subsample
from qcsam.errors import SampleDegenerateError, ShapeError
from qcsam.model import QcsamModel
from qcsam.train import (
    GradientVector,
    MetricsRecord,
    OptimizerState,
    adam_step,
    evaluate,
    loss_and_grad,
    train_run,
)
from tests.conftest import random_sample


@pytest.fixture
def tiny_samples(tiny_config, synthetic_sets):
    train_set, test_set = subsample(
        synthetic_sets[0], synthetic_sets[1], tiny_config.classes, 6, 3, seed=0
    )
    pcas = fit_pipeline(train_set, tiny_config.head_grids, tiny_config.n_qubits)
    return (
        prepare_set(train_set, pcas, tiny_config.classes),
        prepare_set(test_set, pcas, tiny_config.classes),
    )


class TestAdam:
    """Test the Adam update."""

    def test_first_step_moves_by_learning_rate(self):
        """After bias correction the first step has magnitude lr per coordinate."""
        state = OptimizerState.zeros(3, learning_rate=0.1)
        params, state = adam_step(state, np.zeros(3), GradientVector([2.0, -0.5, 0.0]))
        np.testing.assert_allclose(params, [-0.1, 0.1, 0.0], atol=1e-6)
        assert state.step == 1

    def test_moment_accumulation(self):
        state = OptimizerState.zeros(1, beta1=0.9, beta2=0.999)
        _, state = adam_step(state, np.zeros(1), GradientVector([1.0]))
        _, state = adam_step(state, np.zeros(1), GradientVector([1.0]))
        assert state.m[0] == pytest.approx(0.19)
        assert state.v[0] == pytest.approx(0.001999)

    def test_state_is_not_mutated(self):
        state = OptimizerState.zeros(2)
        adam_step(state, np.zeros(2), GradientVector([1.0, 1.0]))
        assert state.step == 0
        np.testing.assert_array_equal(state.m, np.zeros(2))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            adam_step(OptimizerState.zeros(2), np.zeros(3), GradientVector([1.0, 1.0, 1.0]))

    def test_non_finite_gradient(self):
        with pytest.raises(ValueError):
            GradientVector([np.nan])


class TestBatchGradient:
    """Test batch loss/gradient and evaluation."""

    def test_batch_gradient_is_mean(self, small_model, rng):
        params = small_model.init_params(rng)
        batch = [PreparedSample(tuple(random_sample(small_model, rng)), i % 2) for i in range(3)]
        loss, grad = loss_and_grad(small_model, batch, params)
        singles = [loss_and_grad(small_model, [s], params) for s in batch]
        assert loss == pytest.approx(np.mean([s[0] for s in singles]))
        np.testing.assert_allclose(
            grad.values, np.mean([s[1].values for s in singles], axis=0), atol=1e-12
        )

    def test_threaded_matches_serial(self, small_model, rng):
        params = small_model.init_params(rng)
        batch = [PreparedSample(tuple(random_sample(small_model, rng)), i % 2) for i in range(4)]
        serial = loss_and_grad(small_model, batch, params, workers=1)
        threaded = loss_and_grad(small_model, batch, params, workers=3)
        assert serial[0] == pytest.approx(threaded[0])
        np.testing.assert_allclose(serial[1].values, threaded[1].values)

    def test_empty_batch(self, small_model, rng):
        with pytest.raises(ShapeError):
            loss_and_grad(small_model, [], small_model.init_params(rng))

    def test_degenerate_sample_is_tagged(self, small_model, rng, mocker):
        params = small_model.init_params(rng)
        batch = [PreparedSample(tuple(random_sample(small_model, rng)), 0)]
        mocker.patch(
            "qcsam.train.sample_gradient",
            side_effect=SampleDegenerateError("destructive cancellation"),
        )
        with pytest.raises(SampleDegenerateError) as info:
            loss_and_grad(small_model, batch, params, indices=[17])
        assert info.value.sample_index == 17

    def test_evaluate(self, small_model, rng):
        params = small_model.init_params(rng)
        samples = [PreparedSample(tuple(random_sample(small_model, rng)), i % 2) for i in range(4)]
        loss, acc = evaluate(small_model, samples, params)
        assert loss > 0
        assert acc in (0.0, 0.25, 0.5, 0.75, 1.0)

    def test_metrics_record_range(self):
        with pytest.raises(ValueError):
            MetricsRecord(0, 0, 0.5, 1.5, 0.5)


class TestTrainRun:
    """Test seeded training runs."""

    def test_records_every_epoch(self, tiny_config, tiny_samples):
        train, test = tiny_samples
        result = train_run(tiny_config, train, test, seed=0)
        assert [r.epoch for r in result.records] == [0, 1]
        assert result.params is not None
        assert 0.0 <= result.final_test_acc <= 1.0

    def test_same_seed_is_reproducible(self, tiny_config, tiny_samples):
        train, test = tiny_samples
        a = train_run(tiny_config, train, test, seed=3)
        b = train_run(tiny_config, train, test, seed=3)
        assert [r.to_row() for r in a.records] == [r.to_row() for r in b.records]
        np.testing.assert_array_equal(a.params.flatten(), b.params.flatten())

    def test_training_updates_parameters(self, tiny_config, tiny_samples):
        train, test = tiny_samples
        model = QcsamModel.from_config(tiny_config)
        initial = model.init_params(
            np.random.default_rng(0), tiny_config.init_scale, tiny_config.weight_noise
        )
        result = train_run(tiny_config, train, test, seed=0, model=model)
        assert not np.allclose(result.params.flatten(), initial.flatten())

    @pytest.mark.slow
    def test_loss_decreases_on_separable_data(self, tiny_config, tiny_samples):
        train, test = tiny_samples
        config = tiny_config.with_overrides(epochs=6, learning_rate=0.05, batch_size=3)
        result = train_run(config, train, test, seed=1)
        assert result.records[-1].train_loss < result.records[0].train_loss
