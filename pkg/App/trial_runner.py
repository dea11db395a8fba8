"""
Модуль распределения испытаний Монте-Карло по пакетам и процессам.

Пакеты имеют фиксированный размер, не зависящий от числа процессов, а
каждое испытание берёт свой поток по ключу (seed, trial), поэтому результаты
одинаковы при любых --threads и batch_size.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, TypeVar

from .exceptions import DomainError
from .logger_config import worker_logging

logger = logging.getLogger(__name__)

R = TypeVar("R")


@dataclass(frozen=True)
class BatchTask:
    """Пакет испытаний first_trial … first_trial+size-1; испытание trial получает поток (seed, trial)."""
    seed: int
    batch_index: int
    first_trial: int
    size: int
    params: Dict[str, Any] = field(default_factory=dict)


def _init_worker() -> None:
    worker_logging()


class TrialRunner:
    """
    Исполнитель пакетов испытаний.

    При threads == 1 пакеты выполняются в текущем процессе, иначе
    в ProcessPoolExecutor. Результаты возвращаются в порядке пакетов.
    """

    def __init__(self, threads: int = 1, batch_size: int = 1000):
        if threads < 1 or batch_size < 1:
            raise DomainError(f"threads и batch_size должны быть ≥ 1: {threads}, {batch_size}")
        self.threads = threads
        self.batch_size = batch_size
        self._pool: Optional[ProcessPoolExecutor] = None

    def plan(self, trials: int, seed: int, **params: Any) -> List[BatchTask]:
        tasks = []
        for index, first in enumerate(range(0, trials, self.batch_size)):
            size = min(self.batch_size, trials - first)
            tasks.append(BatchTask(seed, index, first, size, dict(params)))
        return tasks

    def map(self, fn: Callable[[BatchTask], R], tasks: List[BatchTask]) -> List[R]:
        if self.threads == 1 or len(tasks) <= 1:
            results = []
            for task in tasks:
                results.append(fn(task))
                logger.debug("Пакет %d выполнен (%d испытаний)", task.batch_index, task.size)
            return results
        if self._pool is None:
            self._pool = ProcessPoolExecutor(max_workers=self.threads, initializer=_init_worker)
            logger.info("Пул процессов запущен: %d процессов", self.threads)
        return list(self._pool.map(fn, tasks, chunksize=1))

    def run(self, fn: Callable[[BatchTask], R], trials: int, seed: int, **params: Any) -> List[R]:
        tasks = self.plan(trials, seed, **params)
        logger.info("Запуск %d испытаний в %d пакетах", trials, len(tasks))
        return self.map(fn, tasks)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True, cancel_futures=True)
            self._pool = None
            logger.info("Пул процессов остановлен.")

    def __enter__(self) -> "TrialRunner":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def default_runner(runner: Optional[TrialRunner]) -> TrialRunner:
    return runner if runner is not None else TrialRunner()
