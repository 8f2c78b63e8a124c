"""
QCSAM experiment runner - command-line entry point.
Subcommands are discovered from the commands package: run, sweep, verify.
"""

import argparse
import asyncio
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from commands import COMMAND_METADATA, COMMAND_SIGNATURES, COMMANDS  # noqa: E402
from utils.base_command import CommandRequest  # noqa: E402
from utils.helpers import get_default_workers  # noqa: E402
from utils.logger import logger  # noqa: E402

# CLI flag -> ExperimentConfig field
OVERRIDE_FLAGS = {
    "seed": "seeds",
    "out": "output_dir",
    "epochs": "epochs",
    "qubits": "n_qubits",
    "classes": "classes",
    "heads": "heads",
    "attention_mode": "attention_mode",
    "dataset": "dataset",
    "workers": "workers",
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "per_class_train": "per_class_train",
    "per_class_test": "per_class_test",
    "gradient_method": "gradient_method",
    "verify_circuit_path": "verify_circuit_path",
}


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="Path of a JSON run configuration")
    parser.add_argument("--seed", type=_int_list, help="Seed or comma-separated seeds")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--qubits", type=int, help="Qubits per patch register")
    parser.add_argument("--classes", type=_int_list, help="Digit labels, e.g. 0,1,2")
    parser.add_argument("--heads", type=int, choices=(1, 2))
    parser.add_argument("--attention-mode", choices=("complex", "real_overlap"))
    parser.add_argument("--dataset", choices=("mnist", "fashion"))
    parser.add_argument("--workers", type=int, help="Threads for per-sample evaluation")
    parser.add_argument("--lr", type=float, help="Adam learning rate")
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--per-class-train", type=int)
    parser.add_argument("--per-class-test", type=int)
    parser.add_argument("--gradient-method", choices=("adjoint", "finite_difference"))
    parser.add_argument(
        "--verify-circuit-path",
        action="store_const",
        const=True,
        default=None,
        help="Compare the circuit-realized forward against the analytic one after training",
    )
    parser.add_argument(
        "--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="Override QCSAM_LOG_LEVEL"
    )


def _add_command_params(parser: argparse.ArgumentParser, name: str):
    descriptions = COMMAND_METADATA.get(name, {}).get("params", {})
    for param in COMMAND_SIGNATURES.get(name, []):
        flag = "--" + param["name"].replace("_", "-")
        help_text = descriptions.get(param["name"])
        if param["annotation"] is bool:
            parser.add_argument(flag, dest=param["name"], action="store_true", help=help_text)
        else:
            kind = param["annotation"] if param["annotation"] in (int, float, str) else str
            parser.add_argument(
                flag, dest=param["name"], type=kind, default=param["default"], help=help_text
            )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="experiment",
        description="Quantum complex-valued self-attention experiments",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in sorted(COMMANDS):
        sub = subparsers.add_parser(
            name, help=COMMAND_METADATA.get(name, {}).get("description", "")
        )
        _add_config_flags(sub)
        _add_command_params(sub, name)
    return parser


def build_request(args: argparse.Namespace) -> CommandRequest:
    overrides: Dict[str, Any] = {}
    for flag, field_name in OVERRIDE_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = tuple(value) if isinstance(value, list) else value
    if "workers" not in overrides:
        workers = get_default_workers()
        if workers is not None:
            overrides["workers"] = workers
    return CommandRequest(config_path=args.config, overrides=overrides)


def command_params(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        param["name"]: getattr(args, param["name"])
        for param in COMMAND_SIGNATURES.get(args.command, [])
    }


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        logger.set_level(args.log_level)
    request = build_request(args)
    return asyncio.run(COMMANDS[args.command](request, **command_params(args)))


if __name__ == "__main__":
    sys.exit(main())
