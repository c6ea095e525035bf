import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "DICTID_THREADS"


def resolve_threads(threads=None):
    """Explicit value, else $DICTID_THREADS, else the core count."""
    if threads is None:
        env = os.environ.get(ENV_THREADS)
        threads = int(env) if env else (os.cpu_count() or 1)
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be positive, got {threads}")
    return threads


def pmap(fn, items, threads=None):
    """Ordered map; results never depend on the thread count."""
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
