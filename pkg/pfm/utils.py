# utils.py

import time
from contextlib import contextmanager


def format_time(seconds: float) -> str:
    '''Render a duration compactly, e.g. 1m12s or 340ms.'''
    if seconds < 1:
        return f"{int(seconds * 1000)}ms"
    minutes, secs = divmod(int(seconds), 60)
    hours, minutes = divmod(minutes, 60)
    if hours:
        return f"{hours}h{minutes:02d}m"
    if minutes:
        return f"{minutes}m{secs:02d}s"
    return f"{seconds:.1f}s"


@contextmanager
def timed(record: dict, key: str = "seconds"):
    '''Store the wall-clock duration of the block in record[key].'''
    start = time.time()
    try:
        yield record
    finally:
        record[key] = time.time() - start
