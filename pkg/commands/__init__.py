"""
Commands package for the experiment CLI.
Every module defines COMMAND_METADATA and an async function named after the module.
"""

import importlib
import inspect
import os
from typing import Any, Callable, Dict, List

from utils.logger import logger

# leading parameters filled in by utils.base_command, not by CLI flags
INJECTED_PARAMS = ("config", "command_start", "store")


def discover_commands():
    """
    Automatically discover all command modules in this package.
    """
    commands: Dict[str, Callable[..., Any]] = {}
    metadata: Dict[str, Any] = {}
    signatures: Dict[str, List[Dict[str, Any]]] = {}

    current_dir = os.path.dirname(__file__)

    for filename in sorted(os.listdir(current_dir)):
        if filename.endswith(".py") and filename != "__init__.py":
            module_name = filename[:-3]

            try:
                module = importlib.import_module(f".{module_name}", package=__name__)

                command_func = getattr(module, module_name, None)
                if command_func and inspect.isfunction(command_func):
                    commands[module_name] = command_func

                    original_func = getattr(command_func, "__wrapped__", command_func)
                    sig = inspect.signature(original_func)
                    signatures[module_name] = [
                        {
                            "name": param.name,
                            "annotation": param.annotation,
                            "default": (
                                param.default
                                if param.default != inspect.Parameter.empty
                                else None
                            ),
                        }
                        for param in sig.parameters.values()
                        if param.name not in INJECTED_PARAMS
                    ]

                if hasattr(module, "COMMAND_METADATA"):
                    metadata[module_name] = getattr(module, "COMMAND_METADATA")

            except ImportError as e:
                logger.warning(f"Could not import command module: {module_name}", error=e)

    return commands, metadata, signatures


# Auto-discover all commands
COMMANDS, COMMAND_METADATA, COMMAND_SIGNATURES = discover_commands()


def get_command_description(command_name: str) -> str:
    return COMMAND_METADATA.get(command_name, {}).get("description", "")

