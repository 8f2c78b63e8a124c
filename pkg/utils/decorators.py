"""
Decorators for experiment code.
"""

import functools
import inspect
import time

from utils.logger import logger


def monitor_performance(operation_name: str = None, level: str = "info"):
    """Decorator to log the wall time of an operation (sync or async functions)"""

    def decorator(func):
        operation = operation_name or func.__name__
        log = getattr(logger, level)

        def _done(start_time: float):
            log(
                f"{operation} completed successfully",
                execution_time=f"{time.time() - start_time:.3f}s",
                operation=operation,
            )

        def _failed(start_time: float, error: Exception):
            logger.error(
                f"{operation} failed",
                execution_time=f"{time.time() - start_time:.3f}s",
                operation=operation,
                error=str(error),
            )

        if inspect.iscoroutinefunction(func):

            @functools.wraps(func)
            async def async_wrapper(*args, **kwargs):
                start_time = time.time()
                try:
                    result = await func(*args, **kwargs)
                except Exception as e:
                    _failed(start_time, e)
                    raise
                _done(start_time)
                return result

            return async_wrapper

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.time()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                _failed(start_time, e)
                raise
            _done(start_time)
            return result

        return wrapper

    return decorator
