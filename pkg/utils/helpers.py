"""
Helper functions used across multiple commands.
"""

import csv
import json
import os
import statistics
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from utils.logger import logger

METRICS_HEADER = ("seed", "epoch", "train_loss", "train_acc", "test_acc")

IDX_FILENAMES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def get_data_dir() -> Path:
    """Root directory of the IDX files (QCSAM_DATA_DIR, default ./data)"""
    return Path(os.getenv("QCSAM_DATA_DIR", "data"))


def get_database_url(configured: Optional[str] = None) -> Optional[str]:
    """Config value first, then QCSAM_DATABASE_URL; None disables the store"""
    return configured or os.getenv("QCSAM_DATABASE_URL") or None


def get_default_workers() -> Optional[int]:
    value = os.getenv("QCSAM_WORKERS")
    if not value:
        return None
    try:
        workers = int(value)
    except ValueError:
        logger.warning("Ignoring non-integer QCSAM_WORKERS", value=value)
        return None
    return workers if workers >= 1 else None


def resolve_data_paths(config) -> Dict[str, Path]:
    """
    Paths of the four IDX files. Explicit config paths win; the rest come
    from <data dir>/<dataset>/ with the standard distribution file names.
    """
    base = get_data_dir() / config.dataset
    paths = {}
    for key, filename in IDX_FILENAMES.items():
        explicit = getattr(config, key)
        paths[key] = Path(explicit) if explicit else base / filename
    return paths


def format_metric(value: float) -> str:
    """Fixed repr for CSV cells so reruns produce identical bytes"""
    return f"{value:.6f}"


def write_metrics_csv(path: Union[str, Path], rows: Iterable[Dict[str, Any]]):
    """One row per (seed, epoch); wall time stays out of the file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in rows:
            writer.writerow(
                [
                    int(row["seed"]),
                    int(row["epoch"]),
                    format_metric(row["train_loss"]),
                    format_metric(row["train_acc"]),
                    format_metric(row["test_acc"]),
                ]
            )


def write_table_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_json(path: Union[str, Path], payload: Dict[str, Any]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)"""
    if not values:
        raise ValueError("mean_std needs at least one value")
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def format_mean_std(values: Sequence[float], scale: float = 100.0) -> str:
    """'mean±std' with 2 decimals, in percent by default"""
    mean, std = mean_std([v * scale for v in values])
    return f"{mean:.2f}±{std:.2f}"


def summarize_seeds(final_accs: Dict[int, float]) -> Dict[str, Any]:
    values: List[float] = [final_accs[s] for s in sorted(final_accs)]
    mean, std = mean_std(values)
    return {
        "final_test_acc": {str(s): final_accs[s] for s in sorted(final_accs)},
        "mean_test_acc": mean,
        "std_test_acc": std,
        "test_acc_pct": format_mean_std(values),
    }
