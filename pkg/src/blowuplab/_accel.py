"""Kernel acceleration switch.

Hot numeric kernels are compiled with numba when available.  Setting the
environment variable ``BLOWUPLAB_DISABLE_NUMBA=1`` (or any non-empty value
other than ``0``) selects the pure-numpy fallback implementations instead;
the fallback is also taken automatically when numba cannot be imported.

``BLOWUPLAB_THREADS`` caps the numba thread pool (and any worker pools the
package spins up).  Both flags are read once at import time.
"""

import os

__all__ = ["NUMBA_ENABLED", "THREADS", "njit", "prange"]


def _env_disabled() -> bool:
    flag = os.environ.get("BLOWUPLAB_DISABLE_NUMBA", "")
    return flag not in ("", "0")


def _env_threads() -> int | None:
    raw = os.environ.get("BLOWUPLAB_THREADS", "")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return max(1, n)


THREADS = _env_threads()

if _env_disabled():
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    from numba import njit, prange

    import numba

    if THREADS is not None:
        numba.set_num_threads(max(1, min(THREADS, numba.config.NUMBA_NUM_THREADS)))
    elif numba.config.NUMBA_NUM_THREADS <= 2:
        # fork-join overhead beats the work on one or two slow cores
        numba.set_num_threads(1)
else:

    def njit(*args, **kwargs):
        """No-op stand-in for numba.njit when the fallback path is active."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range
