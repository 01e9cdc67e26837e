import asyncio
import logging
import sys
import time
from functools import wraps
from pathlib import Path
from typing import Any, Optional, Union

import structlog

_HANDLER_MARK = "_taxacc_handler"


def setup_logging(log_level: str = "INFO", log_file: Optional[Union[str, Path]] = "logs/taxacc.log"):
    """
    Konfiguruje structured logging dla aplikacji.

    Safe to call repeatedly: handlers installed by an earlier call are replaced.

    Args:
        log_level: Poziom logowania (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Ścieżka do pliku logów; None wyłącza zapis do pliku
    """
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer(),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    handlers: list = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        # Logi nigdy nie trafiają do katalogu przebiegu
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))
    for handler in list(root_logger.handlers):
        if getattr(handler, _HANDLER_MARK, False):
            root_logger.removeHandler(handler)
            handler.close()
    for handler in handlers:
        setattr(handler, _HANDLER_MARK, True)
        handler.setFormatter(logging.Formatter("%(message)s"))
        root_logger.addHandler(handler)

    return structlog.get_logger()


def log_execution_time(logger: Optional[Any] = None):
    """
    Dekorator do logowania czasu wykonania funkcji.

    Args:
        logger: Logger do użycia; domyślnie logger modułu dekorowanej funkcji
    """
    def decorator(func):
        log = logger or structlog.get_logger(func.__module__)

        def report(start_time: float, error: Optional[Exception] = None) -> None:
            execution_time = time.perf_counter() - start_time
            if error is None:
                log.info("function_execution", function=func.__name__,
                         execution_time=execution_time, status="success")
            else:
                log.error("function_execution", function=func.__name__,
                          execution_time=execution_time, status="error", error=str(error))

        @wraps(func)
        async def async_wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = await func(*args, **kwargs)
            except Exception as e:
                report(start_time, e)
                raise
            report(start_time)
            return result

        @wraps(func)
        def sync_wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                report(start_time, e)
                raise
            report(start_time)
            return result

        return async_wrapper if asyncio.iscoroutinefunction(func) else sync_wrapper

    return decorator
