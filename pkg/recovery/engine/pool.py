"""Worker pool for independent grid cells.

Tasks are zero-argument callables. Results come back in submission order no matter
which worker finished first, so callers never depend on scheduling.
"""

import asyncio
import concurrent.futures
import logging
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

T = TypeVar("T")

logger = logging.getLogger(__name__)


async def run_parallel_tasks(
    tasks: Sequence[Callable[[], T]],
    max_workers: Optional[int] = None,
    timeout: Optional[float] = None,
    verbose: bool = False,
) -> List[T]:
    """Run callables on a thread pool and return their results.

    Args:
        tasks: Callables to run
        max_workers: Maximum number of concurrent workers
        timeout: Maximum time to wait for all tasks (seconds)
        verbose: Whether to log progress

    Returns:
        List of results, one per task, in the order the tasks were given
    """
    loop = asyncio.get_running_loop()
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [
            loop.run_in_executor(executor, _run_task, task, idx)
            for idx, task in enumerate(tasks)
        ]

        results: List[Tuple[int, T]] = []
        for done, future in enumerate(asyncio.as_completed(futures, timeout=timeout), 1):
            results.append(await future)
            if verbose:
                logger.debug("task %d/%d completed", done, len(tasks))

        results.sort(key=lambda r: r[0])
        return [r[1] for r in results]


def _run_task(task: Callable[[], T], task_id: int) -> Tuple[int, T]:
    """Run a single task and return its result with original index."""
    return task_id, task()


def run_tasks(
    tasks: Sequence[Callable[[], T]],
    max_workers: Optional[int] = None,
    verbose: bool = False,
) -> List[T]:
    """Synchronous front end for :func:`run_parallel_tasks`."""
    if not tasks:
        return []
    return asyncio.run(run_parallel_tasks(tasks, max_workers=max_workers, verbose=verbose))
