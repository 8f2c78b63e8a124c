"""
Training loop: batch loss/gradient, Adam, evaluation and seeded runs.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qcsam.data import PreparedSample
from qcsam.errors import DegenerateReadoutError, SampleDegenerateError, ShapeError
from qcsam.gradients import sample_gradient
from qcsam.model import ModelParams, QcsamModel
from utils.decorators import monitor_performance
from utils.logger import logger


@dataclass(frozen=True, eq=False)
class GradientVector:
    """Gradient in the ModelParams.flatten() layout."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise ValueError("gradient has non-finite entries")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class OptimizerState:
    step: int
    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, n_params: int, **hyper) -> "OptimizerState":
        return cls(0, np.zeros(n_params), np.zeros(n_params), **hyper)


def adam_step(
    state: OptimizerState, params: np.ndarray, grad: GradientVector
) -> Tuple[np.ndarray, OptimizerState]:
    """One bias-corrected Adam update; returns new params and state."""
    params = np.asarray(params, dtype=float)
    g = grad.values
    if not params.shape[0] == g.shape[0] == state.m.shape[0]:
        raise ShapeError(
            f"params ({params.shape[0]}), grad ({g.shape[0]}) and moments "
            f"({state.m.shape[0]}) disagree"
        )
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    updated = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return updated, replace(state, step=t, m=m, v=v)


def _map(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _tag(error: Exception, index: int) -> SampleDegenerateError:
    return SampleDegenerateError(str(error), sample_index=index)


def loss_and_grad(
    model: QcsamModel,
    batch: Sequence[PreparedSample],
    params: ModelParams,
    method: str = "adjoint",
    workers: int = 1,
    indices: Optional[Sequence[int]] = None,
) -> Tuple[float, GradientVector]:
    """Mean cross-entropy over the batch and its gradient."""
    if not batch:
        raise ShapeError("loss_and_grad needs a nonempty batch")
    indices = list(indices) if indices is not None else list(range(len(batch)))

    def one(item):
        index, sample = item
        try:
            return sample_gradient(model, sample.features, sample.label, params, method)
        except (SampleDegenerateError, DegenerateReadoutError) as e:
            raise _tag(e, index) from e

    results = _map(one, list(zip(indices, batch)), workers)
    loss = float(np.mean([r[0] for r in results]))
    grad = np.mean(np.stack([r[1] for r in results]), axis=0)
    return loss, GradientVector(grad)


def evaluate(
    model: QcsamModel,
    samples: Sequence[PreparedSample],
    params: ModelParams,
    workers: int = 1,
) -> Tuple[float, float]:
    """Mean loss and accuracy of the analytic forward."""
    if not samples:
        return 0.0, 0.0

    def one(item):
        index, sample = item
        try:
            dist = model.forward(sample.features, params).distribution
        except (SampleDegenerateError, DegenerateReadoutError) as e:
            raise _tag(e, index) from e
        loss = float(-np.log(max(dist.probs[sample.label], 1e-12)))
        return loss, int(dist.predicted() == sample.label)

    results = _map(one, list(enumerate(samples)), workers)
    losses, hits = zip(*results)
    return float(np.mean(losses)), float(np.mean(hits))


@dataclass(frozen=True)
class MetricsRecord:
    seed: int
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float
    wall_time_seconds: float = 0.0

    def __post_init__(self):
        for name in ("train_acc", "test_acc"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")

    def to_row(self) -> dict:
        return {
            "seed": self.seed,
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "test_acc": self.test_acc,
        }


@dataclass
class TrainResult:
    seed: int
    records: List[MetricsRecord] = field(default_factory=list)
    params: Optional[ModelParams] = None
    wall_time_seconds: float = 0.0

    @property
    def final_test_acc(self) -> float:
        return self.records[-1].test_acc


@monitor_performance("train_run")
def train_run(
    config,
    train: Sequence[PreparedSample],
    test: Sequence[PreparedSample],
    seed: int,
    model: Optional[QcsamModel] = None,
) -> TrainResult:
    """
    Epoch 0 evaluates the initial parameters; every later epoch is one
    shuffled pass of Adam steps followed by a full train/test evaluation.
    """
    model = model or QcsamModel.from_config(config)
    rng = np.random.default_rng(seed)
    params = model.init_params(rng, config.init_scale, config.weight_noise)
    flat = params.flatten()
    state = OptimizerState.zeros(
        flat.shape[0],
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )
    result = TrainResult(seed)
    started = time.time()

    def record(epoch: int):
        train_loss, train_acc = evaluate(model, train, params, config.workers)
        _, test_acc = evaluate(model, test, params, config.workers)
        result.records.append(
            MetricsRecord(
                seed, epoch, train_loss, train_acc, test_acc, time.time() - started
            )
        )
        logger.epoch_completed(seed, epoch, train_loss, train_acc, test_acc)

    record(0)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = [train[i] for i in idx]
            loss, grad = loss_and_grad(
                model, batch, params, config.gradient_method, config.workers, idx
            )
            flat, state = adam_step(state, flat, grad)
            params = model.unflatten(flat)
            logger.debug("Batch step", seed=seed, epoch=epoch, step=state.step, loss=loss)
        record(epoch)

    result.params = params
    result.wall_time_seconds = time.time() - started
    return result
