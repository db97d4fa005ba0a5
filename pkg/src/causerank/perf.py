"""Process-level performance tuning for the dense scoring loops.

Two effects dominate scoring throughput on typical deployments:

* Scoring creates many short-lived megabyte-sized numpy temporaries.
  With glibc's defaults those buffers round-trip through mmap/munmap,
  which is expensive under sandboxed or virtualised kernels.  Raising the
  mmap threshold and disabling trim keeps them on the malloc heap.
* The matrices inside one hypothesis are small (tens of columns), so a
  multi-threaded BLAS spends more time synchronising than computing.  The
  unit of parallelism is the hypothesis, so BLAS itself runs single
  threaded inside each scoring worker.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import logging

log = logging.getLogger(__name__)

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3

_tuned = False
_blas_limited = False


def tune_allocator() -> bool:
    """Keep large numpy temporaries on the malloc heap; idempotent.

    Returns True when the glibc knobs were applied, False on platforms
    without mallopt (the engine works either way, just slower there).
    """
    global _tuned
    if _tuned:
        return True
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6", use_errno=True)
        ok = libc.mallopt(_M_TRIM_THRESHOLD, ctypes.c_int(2**31 - 1))
        ok &= libc.mallopt(_M_MMAP_THRESHOLD, ctypes.c_int(512 * 1024 * 1024))
        _tuned = bool(ok)
    except (OSError, AttributeError):
        log.debug("mallopt unavailable; skipping allocator tuning")
        return False
    return _tuned


def limit_blas_threads(n: int = 1) -> bool:
    """Pin BLAS/LAPACK pools to n threads; idempotent, best effort."""
    global _blas_limited
    if _blas_limited:
        return True
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n, user_api="blas")
        _blas_limited = True
    except Exception as e:
        log.debug("could not limit BLAS threads: %s", e)
        return False
    return True


def tune() -> None:
    """Apply all process-level tuning (allocator + BLAS pools)."""
    tune_allocator()
    limit_blas_threads(1)
