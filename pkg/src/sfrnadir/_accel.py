"""Optional numba acceleration.

Set ``SFRNADIR_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy.
Both variants of a kernel stay importable so they can be benchmarked
against each other in one process.
"""

import os

DISABLED = os.environ.get("SFRNADIR_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED


def jit_pair(func):
    """Return ``(python_version, compiled_version_or_None)``."""
    if not HAVE_NUMBA:
        return func, None
    return func, numba.njit(cache=True, nogil=True)(func)


def select(pair):
    py, jitted = pair
    return jitted if USE_NUMBA and jitted is not None else py
