"""Numba toggle for the hot kernels.

Kernels compile with numba when it is importable; setting
INFOPLANE_DISABLE_NUMBA=1 (or "true"/"yes"/"on") in the environment forces
the pure-numpy fallback path instead. The flag is read once at import time.
"""

import os

NUMBA_DISABLED_BY_ENV = os.environ.get("INFOPLANE_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
    "on",
}

try:
    if NUMBA_DISABLED_BY_ENV:
        raise ImportError("numba disabled by INFOPLANE_DISABLE_NUMBA")
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False
    prange = range

    def njit(*args, **kwargs):
        # decorator passthrough so kernel definitions stay importable
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


DEFAULT_BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"
