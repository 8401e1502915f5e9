"""glibc malloc tuning.

Training allocates many short-lived multi-megabyte temporaries. With glibc's
default dynamic mmap threshold each one is a fresh mapping, and the page faults
on first touch cost more than the arithmetic. Raising the thresholds keeps them
on the heap. Elsewhere this is a no-op.
"""

import ctypes
import ctypes.util

_M_TRIM_THRESHOLD = -1
_M_TOP_PAD = -2
_M_MMAP_THRESHOLD = -3

_done = False


def tune_allocator() -> bool:
    """Returns True if the settings were applied (idempotent)."""
    global _done
    if _done:
        return True
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    mallopt.argtypes = [ctypes.c_int, ctypes.c_int]
    ok = (mallopt(_M_MMAP_THRESHOLD, 256 << 20) == 1
          and mallopt(_M_TRIM_THRESHOLD, 1 << 30) == 1
          and mallopt(_M_TOP_PAD, 512 << 20) == 1)
    _done = ok
    return ok
