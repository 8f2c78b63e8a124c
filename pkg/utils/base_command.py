"""
Base command class for the experiment CLI.
Resolves the configuration, opens the optional results store, times the
command and maps failures onto process exit codes.
"""

import time
from dataclasses import dataclass, field
from functools import wraps
from typing import Any, Callable, Dict, Optional

from qcsam.errors import ConfigError, DataError, IdxFormatError, QcsamError
from utils.config import ExperimentConfig
from utils.helpers import get_database_url
from utils.logger import logger

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_CHECKS = 3


@dataclass
class CommandRequest:
    """What the user asked for: a config file and/or an explicit config, plus flag overrides."""

    config_path: Optional[str] = None
    config: Optional[ExperimentConfig] = None
    overrides: Dict[str, Any] = field(default_factory=dict)

    def resolve(self) -> ExperimentConfig:
        if self.config is not None:
            base = self.config
        elif self.config_path:
            try:
                base = ExperimentConfig.load(self.config_path)
            except OSError as e:
                raise ConfigError(f"cannot read config {self.config_path}: {e}") from e
        else:
            base = ExperimentConfig()
        return base.with_overrides(**self.overrides)


def exit_code_for(error: BaseException) -> Optional[int]:
    """Exit code of a known failure, None for unexpected errors."""
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, (DataError, OSError, QcsamError)):
        return EXIT_DATA
    return None


async def open_store(config: ExperimentConfig):
    url = get_database_url(config.database_url)
    if not url:
        return None
    from results_orm import ResultsStore

    store = ResultsStore(url)
    await store.initialize()
    return store


class BaseCommand:
    """
    Wraps ``async def cmd(config, command_start, store=None, **params)`` into
    ``async def wrapper(request, **params) -> exit code``.
    """

    def __init__(self, command_name: str):
        self.command_name = command_name

    def __call__(self, func: Callable) -> Callable:
        @wraps(func)
        async def wrapper(request: CommandRequest, **params) -> int:
            command_start = time.time()
            store = None
            try:
                config = request.resolve()
                logger.command_executed(self.command_name, config.name, **params)
                store = await open_store(config)
                result = await func(config, command_start, store=store, **params)
                code = EXIT_OK if result is None else int(result)
            except Exception as error:
                code = exit_code_for(error)
                if code is None:
                    logger.error(
                        f"Unexpected error in {self.command_name} command: {error}",
                        command=self.command_name,
                        total_time=f"{time.time() - command_start:.3f}s",
                    )
                    raise
                logger.command_error(
                    self.command_name,
                    str(error),
                    code,
                    field=getattr(error, "field", None),
                    offset=getattr(error, "offset", None)
                    if isinstance(error, IdxFormatError)
                    else None,
                    total_time=f"{time.time() - command_start:.3f}s",
                )
                return code
            finally:
                if store is not None:
                    await store.close()

            if code == EXIT_OK:
                logger.command_success(self.command_name, time.time() - command_start)
            else:
                logger.command_error(self.command_name, "checks failed", code)
            return code

        return wrapper


def command(command_name: str):
    """
    Decorator to create a CLI command.

    Usage:
        @command('run')
        async def run(config, command_start, store=None):
            # Command logic here
    """
    return BaseCommand(command_name)
