import asyncio
import logging
from typing import Any, Awaitable, Iterable, List, Union

logger = logging.getLogger(__name__)


class TaskStatus:
    """Status zadania."""
    COMPLETED = "completed"
    FAILED = "failed"


class BoundedTaskRunner:
    """Wykonuje korutyny współbieżnie z limitem zadań w locie."""

    def __init__(self, max_in_flight: int = 4):
        """
        Args:
            max_in_flight: Maksymalna liczba jednoczesnych zadań
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.max_in_flight = max_in_flight
        self.status_counts = {TaskStatus.COMPLETED: 0, TaskStatus.FAILED: 0}

    async def _run_with_semaphore(self, semaphore: asyncio.Semaphore, coro: Awaitable[Any]) -> Any:
        async with semaphore:
            try:
                result = await coro
            except Exception as e:
                self.status_counts[TaskStatus.FAILED] += 1
                logger.debug(f"Task failed: {e}")
                return e
            self.status_counts[TaskStatus.COMPLETED] += 1
            return result

    async def run_all(self, coros: Iterable[Awaitable[Any]]) -> List[Union[Any, Exception]]:
        """
        Uruchamia wszystkie korutyny i zwraca wyniki w kolejności wejścia.

        A failed coroutine yields its exception object in place of a result.
        """
        semaphore = asyncio.Semaphore(self.max_in_flight)
        results = await asyncio.gather(*(self._run_with_semaphore(semaphore, c) for c in coros))
        logger.info(
            f"Finished {len(results)} tasks "
            f"({self.status_counts[TaskStatus.FAILED]} failed, limit {self.max_in_flight})"
        )
        return list(results)
