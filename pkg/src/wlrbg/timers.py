import contextlib
import time


@contextlib.contextmanager
def timed(record, key="seconds"):
    """Store the wall-clock duration of the block in ``record[key]``."""
    start = time.perf_counter()
    try:
        yield record
    finally:
        record[key] = time.perf_counter() - start
