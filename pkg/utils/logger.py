import logging
import os
from typing import Optional


class RunLogger:
    """Plain key=value logger for experiment runs; timestamps left to the caller's sink"""

    def __init__(self, name: str = "qcsam"):
        self.logger = logging.getLogger(name)
        level = getattr(logging, os.getenv("QCSAM_LOG_LEVEL", "INFO").upper(), logging.INFO)
        self.logger.setLevel(level)

        # No formatter - output is piped to files and CI logs as-is
        handler = logging.StreamHandler()
        handler.setLevel(level)

        # Avoid duplicate handlers
        if not self.logger.handlers:
            self.logger.addHandler(handler)

    def set_level(self, level: str):
        """Change the level of the logger and its handlers"""
        resolved = getattr(logging, level.upper(), logging.INFO)
        self.logger.setLevel(resolved)
        for handler in self.logger.handlers:
            handler.setLevel(resolved)

    def _format_message(self, message: str, **kwargs) -> str:
        """Format log message as 'message | key=value | ...'"""

        parts = [message]

        for key, value in kwargs.items():
            if value is not None:
                if isinstance(value, bool):
                    formatted_value = str(value)
                elif isinstance(value, (int, float)):
                    formatted_value = (
                        f"{value:,}" if isinstance(value, int) else f"{value:.3f}"
                    )
                elif isinstance(value, str):
                    formatted_value = value
                else:
                    formatted_value = str(value)

                parts.append(f"{key}={formatted_value}")

        return " | ".join(parts)

    def info(self, message: str, **kwargs):
        """Log info level message"""
        formatted = self._format_message(message, **kwargs)
        self.logger.info(formatted)

    def warning(self, message: str, **kwargs):
        """Log warning level message"""
        formatted = self._format_message(message, **kwargs)
        self.logger.warning(formatted)

    def error(self, message: str, **kwargs):
        """Log error level message"""
        formatted = self._format_message(message, **kwargs)
        self.logger.error(formatted)

    def debug(self, message: str, **kwargs):
        """Log debug level message"""
        formatted = self._format_message(message, **kwargs)
        self.logger.debug(formatted)

    def command_executed(self, command: str, config_name: Optional[str] = None, **kwargs):
        """Log CLI command start"""
        self.info(f"Command executed: {command}", config=config_name, **kwargs)

    def command_success(self, command: str, execution_time: float, **kwargs):
        """Log successful command execution"""
        self.info(
            f"Command completed: {command}",
            time=f"{execution_time:.3f}s",
            **kwargs,
        )

    def command_error(self, command: str, error: str, exit_code: int, **kwargs):
        """Log command execution errors"""
        self.error(
            f"Command failed: {command}",
            error=error,
            exit_code=exit_code,
            **kwargs,
        )

    def run_event(self, event: str, **kwargs):
        """Log training run lifecycle events"""
        self.info(f"Run event: {event}", **kwargs)

    def epoch_completed(
        self,
        seed: int,
        epoch: int,
        train_loss: float,
        train_acc: float,
        test_acc: float,
        **kwargs,
    ):
        """Log one finished epoch"""
        self.info(
            f"Epoch {epoch} finished",
            seed=seed,
            train_loss=train_loss,
            train_acc=train_acc,
            test_acc=test_acc,
            **kwargs,
        )

    def check_result(self, check: str, passed: bool, **kwargs):
        """Log a verification check outcome"""
        if passed:
            self.info(f"Check passed: {check}", **kwargs)
        else:
            self.error(f"Check failed: {check}", **kwargs)

    def database_operation(self, operation: str, table: str, success: bool, **kwargs):
        """Log database operations"""
        if success:
            self.info(f"Database {operation} on {table}", **kwargs)
        else:
            self.error(f"Database {operation} failed on {table}", **kwargs)


# Global logger instance
logger = RunLogger()
