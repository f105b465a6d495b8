"""Utilities for running replications.

Attributes:
    replication_columns (list[str]): Columns of the long-format replication table.
"""

import logging
import multiprocessing
from typing import Callable, Optional

import numpy as np
import tqdm

from adapt_gmm.configuration.utilities import get_thread_count


logger = logging.getLogger(__name__)

replication_columns = ["method", "alpha", "replication", "fdp", "tpr", "rejections", "false_discoveries"]


def replication_rng(seed: int, replication: int, stream: int=0) -> np.random.Generator:
    """Independent generator of one replication, derived from the master seed and the replication index."""
    return np.random.default_rng([seed, replication, stream])


def perform_parallel_simulation(args: list, simulation: Callable, max_workers: Optional[int]=None) -> list:
    """Wrapper to the multiprocessing imap_unordered method.

        The arguments are mapped with the simulation by a maximum number of workers. Every argument must be a
        lookup with the key "replication"; the results are sorted by it, so the output does not depend on the order
        in which the workers finish.

        Args:
            args (list[dict]): Arguments passed to the simulation.
            simulation (callable): Function applied to each item of args. Must have a single argument and be
                picklable.
            max_workers (int): Maximum number of pool workers, capped by get_thread_count().

        Returns:
            List of the return values of the simulation, one for each argument, ordered by replication.
    """
    workers = get_thread_count() if max_workers is None else max(1, min(max_workers, get_thread_count()))
    simulations = len(args)
    if simulations == 0:
        return []
    if workers == 1:
        return perform_trivial_simulation(args, simulation)

    chunksize = max(1, int(simulations / workers) + (1 if simulations % workers > 0 else 0))
    logger.info("Running %d replications on %d workers with chunksize %d.", simulations, workers, chunksize)

    results = []
    with multiprocessing.Pool(workers) as pool:
        for result in tqdm.tqdm(pool.imap_unordered(func=simulation, iterable=args, chunksize=chunksize),
                                total=simulations):
            results.append(result)
    return sorted(results, key=lambda result: result["replication"])


def perform_trivial_simulation(args: list, simulation: Callable, max_workers: Optional[int]=None) -> list:
    """Sequential twin of perform_parallel_simulation() with the same interface, for debugging and tests."""
    results = [simulation(arg) for arg in tqdm.tqdm(args, disable=len(args) < 2)]
    return sorted(results, key=lambda result: result["replication"])
