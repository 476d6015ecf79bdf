from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from core.config import app_settings
from core.exceptions import InputValidationError
from core.logging_config import setup_logger

logger = setup_logger()

T = TypeVar("T")


class ChunkRunner:
    """
    Executes independent chunks of a Monte Carlo job on a pool of workers.
    Results always come back in chunk order, so reductions do not depend on
    the worker count.
    """

    def __init__(self, workers: int | None = None):
        """
        Initialize the runner.

        :param self: Instance of the ChunkRunner class
        :param workers: Worker threads, defaults to the configured DEFAULT_WORKERS
        :type workers: int | None
        """
        self.workers = workers if workers is not None else app_settings.DEFAULT_WORKERS
        if self.workers < 1:
            raise InputValidationError(f"workers must be positive, got {self.workers}")

    def map_chunks(self, job: Callable[[int, int], T], sizes: list[int]) -> list[T]:
        """
        Run job(chunk_index, chunk_size) for every chunk.

        :param self: Instance of the ChunkRunner class
        :param job: Chunk worker, must only depend on its arguments
        :type job: Callable[[int, int], T]
        :param sizes: Size of each chunk
        :type sizes: list[int]
        :return: Per-chunk results in chunk order
        :rtype: list[T]
        """
        logger.debug(f"Running {len(sizes)} chunks on {self.workers} workers")
        if self.workers == 1 or len(sizes) <= 1:
            return [job(index, size) for index, size in enumerate(sizes)]

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [
                pool.submit(job, index, size) for index, size in enumerate(sizes)
            ]
            return [future.result() for future in futures]
