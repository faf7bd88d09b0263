from concurrent.futures import ThreadPoolExecutor


def chunked_map(fn, n, chunk_size, n_jobs=1):
    """Apply ``fn(start, stop)`` over ``range(n)`` in chunks, preserving order.

    Threads are used because the heavy lifting happens inside numpy, which
    releases the GIL. Results never depend on ``n_jobs``.
    """
    bounds = [(i, min(i + chunk_size, n)) for i in range(0, n, chunk_size)]
    if n_jobs == 1 or len(bounds) < 2:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))


def parallel_map(fn, items, n_jobs=1):
    items = list(items)
    if n_jobs == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))
