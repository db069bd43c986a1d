"""
Seeded replicate execution for bootstrap and Monte Carlo loops
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")


def run_replicates(
    task: Callable[[int, np.random.Generator], T],
    n: int,
    seed: Optional[int],
    threads: int = 1,
) -> List[T]:
    """Run ``task(index, rng)`` for each replicate

    Every replicate owns a generator spawned from one SeedSequence, and results come back
    in replicate-index order, so output does not depend on the worker count.
    """
    if n <= 0:
        return []
    children = np.random.SeedSequence(seed).spawn(n)
    generators = [np.random.default_rng(child) for child in children]
    if threads <= 1:
        return [task(i, rng) for i, rng in enumerate(generators)]
    logger.debug("Running %d replicates on %d threads", n, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(n), generators))
