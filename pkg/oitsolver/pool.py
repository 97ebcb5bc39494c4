"""Ordered worker pool and reduction settings."""

import math
import logging
import numpy as np

from concurrent.futures import ThreadPoolExecutor

logger = logging.getLogger("OIT Solver")


class Settings:
    workers = 1
    deterministic = False


settings = Settings()


def configure(workers=1, deterministic=False):
    """Set the worker cap and the reduction mode for the whole process."""
    if workers < 1:
        raise ValueError("workers must be >= 1, got {}".format(workers))

    settings.workers = int(workers)
    settings.deterministic = bool(deterministic)

    logger.debug(
        "pool configured: workers={} deterministic={}".format(
            settings.workers, settings.deterministic
        )
    )


def parallel_map(func, items, workers=None):
    """Apply func to every item, returning results in input order."""
    items = list(items)
    workers = settings.workers if workers is None else workers

    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(func, items))


def reduce_sum(values, axis=0):
    """Sum along axis; ordered fsum when deterministic mode is on."""
    values = np.asarray(values)

    if not settings.deterministic:
        return np.sum(values, axis=axis)

    if np.iscomplexobj(values):
        return reduce_sum(values.real, axis) + 1j * reduce_sum(values.imag, axis)

    moved = np.moveaxis(values, axis, -1)
    flat = moved.reshape(-1, moved.shape[-1])
    out = np.array([math.fsum(row) for row in flat])

    return out.reshape(moved.shape[:-1]) if moved.ndim > 1 else out[0]
