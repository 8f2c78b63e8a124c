"""
Verify command: run the property and oracle checks of the simulation stack.
"""

# Command metadata
COMMAND_METADATA = {
    "aliases": [],
    "description": "Run the circuit/oracle property checks and write verification.json.",
    "params": {
        "trials_scale": "Multiply every check's default trial count",
        "only": "Comma-separated check names to run (default: all)",
    },
}

import asyncio
import time
from pathlib import Path

from qcsam.errors import ConfigError
from qcsam.verification import CHECKS, DEFAULT_TRIALS, run_checks
from utils.base_command import EXIT_CHECKS, EXIT_OK, command
from utils.config import ExperimentConfig
from utils.helpers import write_json
from utils.logger import logger


def scaled_trials(scale: float) -> dict:
    if scale <= 0:
        raise ConfigError("trials_scale: must be positive", field="trials_scale")
    return {name: max(1, int(round(count * scale))) for name, count in DEFAULT_TRIALS.items()}


def selected_checks(only: str):
    names = [n.strip() for n in only.split(",") if n.strip()]
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(
            f"only: unknown check {unknown[0]!r}, expected one of {sorted(CHECKS)}",
            field="only",
        )
    return names or None


@command("verify")
async def verify(
    config: ExperimentConfig,
    command_start: float,
    store=None,
    trials_scale: float = 1.0,
    only: str = "",
):
    """Run the verification suite"""
    trials = scaled_trials(trials_scale)
    names = selected_checks(only)
    seed = config.seeds[0]

    report = await asyncio.to_thread(run_checks, seed, trials, names)

    out_dir = Path(config.output_dir)
    write_json(out_dir / "verification.json", report.to_dict())
    failed = [c.name for c in report.checks if not c.passed]
    logger.info(
        "Verification finished",
        checks=len(report.checks),
        failed=",".join(failed) or None,
        total_time=f"{time.time() - command_start:.3f}s",
    )
    return EXIT_OK if report.passed else EXIT_CHECKS
