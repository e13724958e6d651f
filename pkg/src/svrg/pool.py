from __future__ import annotations

import asyncio
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from functools import partial
from logging import getLogger
from typing import Any, Callable, Iterable, List, TypeVar, Union

from .errors import Closed

logger = getLogger(__package__)

T = TypeVar("T")


def _executor(size: int, processes: bool) -> Executor:
    return ProcessPoolExecutor(size) if processes else ThreadPoolExecutor(size)


@dataclass(eq=False)
class WorkerPool:
    """Fixed-size pool running independent model fits off the event loop

    Example use:

        pool = await WorkerPool.create(4)
        try:
            results = await pool.map(fit, windows)
        finally:
            await pool.close()

    """

    size: int
    processes: bool
    executor: Executor
    closing: bool = False
    closed: bool = False
    errors: int = 0
    pending: int = 0
    completed: int = 0

    @classmethod
    async def create(cls, size=2, processes=False) -> WorkerPool:
        """Start `size` worker threads, or processes, and return the pool"""
        if size < 1:
            raise ValueError("Worker pool size must be strictly positive")
        return cls(size, processes, _executor(size, processes))

    async def submit(self, fn: Callable[..., T], *args: Any) -> T:
        """Run `fn(*args)` on a worker and return its result"""
        if self.closing:
            raise Closed("Worker pool is closed")
        with self.count_jobs():
            loop = asyncio.get_running_loop()
            return await loop.run_in_executor(self.executor, partial(fn, *args))

    async def map(
        self, fn: Callable[..., T], jobs: Iterable[tuple]
    ) -> List[Union[T, BaseException]]:
        """Run `fn` once per argument tuple; failures are returned in place"""
        return await asyncio.gather(
            *(self.submit(fn, *args) for args in jobs), return_exceptions=True
        )

    async def close(self):
        """Wait for running jobs and release the workers"""
        self.closing = True
        try:
            loop = asyncio.get_running_loop()
            await loop.run_in_executor(None, self.executor.shutdown)
        finally:
            self.closed = True

    def resize(self, size: int):
        """Resize the pool

        Jobs already running finish on the old workers.
        """
        if size < 1:
            raise ValueError("Worker pool size must be strictly positive")
        if self.closing:
            raise Closed("Worker pool is closed")
        old, self.executor = self.executor, _executor(size, self.processes)
        self.size = size
        old.shutdown(wait=False)

    def __repr__(self):
        bits = [
            self.state,
            "processes" if self.processes else "threads",
            f"size:{self.size}",
            f"pending:{self.pending}",
            f"completed:{self.completed}",
            f"errors:{self.errors}",
        ]
        return "<WorkerPool %s>" % " ".join(bits)

    @property
    def state(self):
        return "closed" if self.closed else "closing" if self.closing else "active"

    @contextmanager
    def count_jobs(self):
        try:
            self.pending += 1
            yield
            self.completed += 1
        except Exception:
            self.errors += 1
            raise
        finally:
            self.pending -= 1
