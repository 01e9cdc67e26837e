import asyncio
import logging
import time
from enum import Enum
from typing import Any, Awaitable, Callable, Tuple, Type

from core.exceptions import CircuitOpenError

logger = logging.getLogger(__name__)


class CircuitState(Enum):
    CLOSED = "CLOSED"  # Normalny stan, zapytania są wykonywane
    OPEN = "OPEN"      # Stan awaryjny, zapytania są blokowane
    HALF_OPEN = "HALF_OPEN"  # Stan przejściowy, pozwala na testowe zapytania


class CircuitBreaker:
    """Implementacja wzorca Circuit Breaker."""

    def __init__(
        self,
        name: str,
        failure_threshold: int = 5,
        recovery_timeout: float = 30,
        expected_exceptions: Tuple[Type[BaseException], ...] = (Exception,)
    ):
        """
        Args:
            name: Nazwa circuit breakera
            failure_threshold: Liczba kolejnych błędów, po której circuit zostanie otwarty
            recovery_timeout: Czas w sekundach, po którym circuit przejdzie w stan HALF_OPEN
            expected_exceptions: Typy wyjątków, które są traktowane jako błędy
        """
        self.name = name
        self.failure_threshold = failure_threshold
        self.recovery_timeout = recovery_timeout
        self.expected_exceptions = expected_exceptions

        self.state = CircuitState.CLOSED
        self.failure_count = 0
        self.last_failure_time = 0.0

    async def __call__(self, func: Callable[..., Awaitable[Any]], *args, **kwargs) -> Any:
        """
        Wykonuje funkcję zgodnie z logiką Circuit Breaker.

        Raises:
            CircuitOpenError: Gdy circuit jest otwarty
            Exception: Oryginalny wyjątek z funkcji
        """
        if self.state == CircuitState.OPEN:
            if time.monotonic() - self.last_failure_time > self.recovery_timeout:
                logger.info(f"Circuit {self.name} switching to HALF_OPEN state")
                self.state = CircuitState.HALF_OPEN
            else:
                raise CircuitOpenError(f"Circuit {self.name} is OPEN")

        try:
            result = await func(*args, **kwargs)
        except self.expected_exceptions:
            self.failure_count += 1
            self.last_failure_time = time.monotonic()
            if self.state == CircuitState.HALF_OPEN or self.failure_count >= self.failure_threshold:
                if self.state != CircuitState.OPEN:
                    logger.warning(f"Circuit {self.name} switching to OPEN state")
                self.state = CircuitState.OPEN
            raise

        if self.state == CircuitState.HALF_OPEN:
            logger.info(f"Circuit {self.name} switching to CLOSED state")
            self.state = CircuitState.CLOSED
        self.failure_count = 0
        return result


async def retry_async(
    func: Callable[..., Awaitable[Any]],
    *args: Any,
    attempts: int = 3,
    base_delay: float = 0.5,
    max_delay: float = 8.0,
    retry_on: Tuple[Type[BaseException], ...] = (Exception,),
    **kwargs: Any,
) -> Any:
    """
    Ponawia wywołanie z wykładniczym opóźnieniem.

    Args:
        func: Korutyna do wykonania
        attempts: Maksymalna liczba prób (>= 1)
        base_delay: Opóźnienie przed drugą próbą w sekundach
        max_delay: Górny limit opóźnienia
        retry_on: Typy wyjątków, po których ponawiamy

    Raises:
        Exception: Ostatni wyjątek, gdy wszystkie próby zawiodą
    """
    for attempt in range(1, attempts + 1):
        try:
            return await func(*args, **kwargs)
        except CircuitOpenError:
            raise
        except retry_on as e:
            if attempt == attempts:
                raise
            delay = min(base_delay * 2 ** (attempt - 1), max_delay)
            logger.warning(f"Attempt {attempt}/{attempts} failed ({e}); retrying in {delay:.2f}s")
            await asyncio.sleep(delay)
