"""numba switch.

Set ``MGFORM_NO_NUMBA=1`` to run every kernel as plain Python / numpy. The
flag is read once at import time.
"""

import os

USE_NUMBA = os.environ.get("MGFORM_NO_NUMBA", "").strip().lower() not in {"1", "true", "yes"}

if USE_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:
    def jit(fn):
        return _njit(cache=True)(fn)
else:
    def jit(fn):
        return fn
