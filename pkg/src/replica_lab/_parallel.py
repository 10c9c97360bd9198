import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("REPLICA_LAB_WORKERS", "1")))
    except ValueError:
        return 1


def map_ordered(fn, items, workers: int = 1) -> list:
    """``list(map(fn, items))``, optionally spread over processes; output order is input order."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
