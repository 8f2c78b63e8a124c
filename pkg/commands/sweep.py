"""
Sweep command: run a grid of configurations and tabulate mean±std test accuracy.
"""

# Command metadata
COMMAND_METADATA = {
    "aliases": [],
    "description": "Run the qubits x classes x heads grid (or the attention ablation) and write sweep.csv.",
    "params": {
        "qubit_counts": "Qubit counts, e.g. '3-8' or '4,6'",
        "class_counts": "Class counts, e.g. '2,3,4' (classes 0..c-1)",
        "head_counts": "Head counts, e.g. '1,2'",
        "ablation": "Compare complex and real_overlap attention at the configured classes",
    },
}

import asyncio
import time
from pathlib import Path
from typing import Dict, List, Tuple

from qcsam.errors import ConfigError, QcsamError
from qcsam.model import ATTENTION_MODES
from utils.base_command import command
from utils.config import ExperimentConfig
from utils.helpers import write_json, write_table_csv
from utils.logger import logger

from .run import execute_run, load_splits

FAILED = "failed"


def parse_int_list(text: str, field_name: str) -> List[int]:
    """'3-5,8' -> [3, 4, 5, 8]"""
    values: List[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                low, high = (int(v) for v in part.split("-", 1))
                if high < low:
                    raise ValueError(part)
                values.extend(range(low, high + 1))
            elif part:
                values.append(int(part))
    except ValueError as e:
        raise ConfigError(f"{field_name}: cannot parse {text!r}", field=field_name) from e
    if not values:
        raise ConfigError(f"{field_name}: empty list", field=field_name)
    return sorted(set(values))


def grid_cells(
    qubits: List[int],
    class_counts: List[int],
    head_counts: List[int],
) -> List[Tuple[int, str, Dict]]:
    """(n_qubits, column key, overrides) for the qubits x classes x heads table."""
    cells = []
    for q in qubits:
        for c in class_counts:
            for h in head_counts:
                key = f"{c}class_{h}H"
                cells.append(
                    (q, key, {"n_qubits": q, "classes": tuple(range(c)), "heads": h})
                )
    return cells


def ablation_cells(qubits: List[int]) -> List[Tuple[int, str, Dict]]:
    return [
        (q, mode, {"n_qubits": q, "attention_mode": mode})
        for q in qubits
        for mode in ATTENTION_MODES
    ]


def sweep_table(
    qubits: List[int], columns: List[str], cells: Dict[Tuple[int, str], str]
) -> List[List[str]]:
    return [[str(q)] + [cells.get((q, col), FAILED) for col in columns] for q in qubits]


async def execute_sweep(
    config: ExperimentConfig,
    out_dir: Path,
    cell_specs: List[Tuple[int, str, Dict]],
    store=None,
    splits=None,
) -> Dict[Tuple[int, str], str]:
    """Runs every cell; a failing cell is marked and the sweep moves on."""
    if splits is None:
        splits = await asyncio.to_thread(load_splits, config)
    results: Dict[Tuple[int, str], str] = {}
    for q, key, overrides in cell_specs:
        cell_name = f"{config.name}_q{q}_{key}"
        cell_dir = out_dir / "cells" / f"q{q}_{key}"
        status, mean_acc, std_acc, error = "ok", None, None, None
        try:
            cell_config = config.with_overrides(
                name=cell_name, output_dir=str(cell_dir), **overrides
            )
            summary = await execute_run(cell_config, cell_dir, store, splits=splits)
            results[(q, key)] = summary["test_acc_pct"]
            mean_acc, std_acc = summary["mean_test_acc"], summary["std_test_acc"]
        except (QcsamError, OSError) as e:
            status, error = FAILED, f"{type(e).__name__}: {e}"
            results[(q, key)] = FAILED
            logger.warning("Sweep cell failed", cell=cell_name, error=error)
        if store is not None:
            await store.record_sweep_cell(
                config.name, q, key, status, mean_acc=mean_acc, std_acc=std_acc, error=error
            )
    return results


@command("sweep")
async def sweep(
    config: ExperimentConfig,
    command_start: float,
    store=None,
    qubit_counts: str = "3-8",
    class_counts: str = "2,3,4",
    head_counts: str = "1,2",
    ablation: bool = False,
):
    """Run a grid of configurations and write the results table"""
    qubit_list = parse_int_list(qubit_counts, "qubit_counts")
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if ablation:
        specs = ablation_cells(qubit_list)
        columns = list(ATTENTION_MODES)
    else:
        class_list = parse_int_list(class_counts, "class_counts")
        head_list = parse_int_list(head_counts, "head_counts")
        specs = grid_cells(qubit_list, class_list, head_list)
        columns = [f"{c}class_{h}H" for c in class_list for h in head_list]

    # reject bad grid values before any training starts
    for _, _, overrides in specs:
        config.with_overrides(**overrides)

    logger.run_event(
        "Sweep started", sweep=config.name, cells=len(specs), ablation=ablation
    )
    cells = await execute_sweep(config, out_dir, specs, store)

    table = sweep_table(qubit_list, columns, cells)
    write_table_csv(out_dir / "sweep.csv", ["qubits"] + columns, table)
    failed = [f"q{q}_{key}" for (q, key), value in cells.items() if value == FAILED]
    write_json(
        out_dir / "sweep_summary.json",
        {
            "config": config.to_dict(),
            "ablation": ablation,
            "columns": columns,
            "failed_cells": failed,
            "table": {f"q{q}_{key}": value for (q, key), value in cells.items()},
        },
    )
    logger.info(
        "Sweep finished",
        cells=len(specs),
        failed=len(failed),
        total_time=f"{time.time() - command_start:.3f}s",
    )
