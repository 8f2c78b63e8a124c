"""
Run command: train one configuration over all of its seeds and persist the metrics.
"""

# Command metadata
COMMAND_METADATA = {
    "aliases": [],
    "description": "Train a QCSAM configuration for every seed and write metrics.csv and summary.json.",
    "params": {},
}

import asyncio
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from qcsam.data import ImageSet, fit_pipeline, load_idx, prepare_set, subsample
from qcsam.model import QcsamModel
from qcsam.train import TrainResult, train_run
from utils.base_command import command
from utils.config import ExperimentConfig
from utils.helpers import resolve_data_paths, summarize_seeds, write_json, write_metrics_csv
from utils.logger import logger


def load_splits(config: ExperimentConfig) -> Tuple[ImageSet, ImageSet]:
    """Dataset train and test partitions as stored on disk."""
    paths = resolve_data_paths(config)
    train = load_idx(paths["train_images"], paths["train_labels"])
    test = load_idx(paths["test_images"], paths["test_labels"])
    logger.run_event(
        "Dataset loaded",
        dataset=config.dataset,
        train_images=len(train),
        test_images=len(test),
    )
    return train, test


def circuit_path_deviation(model: QcsamModel, result: TrainResult, samples) -> float:
    """Largest probability gap between the analytic and circuit-realized forwards."""
    worst = 0.0
    for sample in samples:
        analytic = model.forward(sample.features, result.params).distribution.probs
        circuit = model.forward_circuit(sample.features, result.params).distribution.probs
        worst = max(worst, float(np.max(np.abs(analytic - circuit))))
    return worst


def run_seed(config: ExperimentConfig, splits: Tuple[ImageSet, ImageSet], seed: int) -> Tuple[TrainResult, Optional[float]]:
    train_set, test_set = subsample(
        splits[0],
        splits[1],
        config.classes,
        config.per_class_train,
        config.per_class_test,
        seed,
    )
    pcas = fit_pipeline(train_set, config.head_grids, config.n_qubits)
    train = prepare_set(train_set, pcas, config.classes)
    test = prepare_set(test_set, pcas, config.classes)
    model = QcsamModel.from_config(config)
    result = train_run(config, train, test, seed, model=model)
    deviation = None
    if config.verify_circuit_path and test:
        deviation = circuit_path_deviation(model, result, test[:1])
        logger.run_event("Circuit path compared", seed=seed, max_deviation=f"{deviation:.3e}")
    return result, deviation


async def execute_run(
    config: ExperimentConfig,
    out_dir: Path,
    store=None,
    splits: Optional[Tuple[ImageSet, ImageSet]] = None,
) -> Dict[str, Any]:
    """Train every seed of ``config``; returns the summary written to summary.json."""
    out_dir = Path(out_dir)
    if splits is None:
        splits = await asyncio.to_thread(load_splits, config)

    results: List[TrainResult] = []
    deviations: Dict[str, float] = {}
    for seed in config.seeds:
        logger.run_event("Seed started", config=config.name, seed=seed)
        result, deviation = await asyncio.to_thread(run_seed, config, splits, seed)
        results.append(result)
        if deviation is not None:
            deviations[str(seed)] = deviation
        if store is not None:
            run_id = await store.record_run(
                config.name,
                config.to_dict(),
                seed,
                final_test_acc=result.final_test_acc,
                wall_time_seconds=result.wall_time_seconds,
            )
            await store.add_epoch_metrics(
                run_id,
                [
                    dict(r.to_row(), wall_time_seconds=r.wall_time_seconds)
                    for r in result.records
                ],
            )

    write_metrics_csv(
        out_dir / "metrics.csv",
        [r.to_row() for result in results for r in result.records],
    )
    summary = summarize_seeds({r.seed: r.final_test_acc for r in results})
    summary.update(
        {
            "config": config.to_dict(),
            "epochs": config.epochs,
            "wall_time_seconds": {str(r.seed): r.wall_time_seconds for r in results},
        }
    )
    if deviations:
        summary["circuit_path_max_deviation"] = deviations
    write_json(out_dir / "summary.json", summary)
    logger.run_event(
        "Run finished",
        config=config.name,
        seeds=len(results),
        test_acc=summary["test_acc_pct"],
    )
    return summary


@command("run")
async def run(config: ExperimentConfig, command_start: float, store=None):
    """Train a configuration over all seeds"""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.save(out_dir / "config.json")
    await execute_run(config, out_dir, store)
    logger.info(
        "Run outputs written",
        out=str(out_dir),
        total_time=f"{time.time() - command_start:.3f}s",
    )
