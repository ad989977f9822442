"""Numba acceleration toggle.

Hot numeric kernels are JIT-compiled with numba by default. Setting the
environment variable ``AIRFEEL_DISABLE_NUMBA=1`` (before import) selects the
pure-numpy fallback implementations instead; results agree between the two
paths up to floating-point summation order.
"""

import os

ENV_FLAG = "AIRFEEL_DISABLE_NUMBA"


def _flag_set() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


NUMBA_DISABLED = _flag_set()

if NUMBA_DISABLED:
    HAVE_NUMBA = False
    njit = None
else:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False
        njit = None

USE_NUMBA = HAVE_NUMBA
