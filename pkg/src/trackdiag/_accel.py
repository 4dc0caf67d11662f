"""Optional numba acceleration.

Hot loops are written once as scalar Python and compiled with ``numba.njit``
unless ``TRACKDIAG_DISABLE_NUMBA=1`` is set (or numba is missing), in which
case callers dispatch to vectorised numpy equivalents instead.
"""

import os

_DISABLED = os.environ.get("TRACKDIAG_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    import numba

    NUMBA_ENABLED = True
except ImportError:
    numba = None
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if NUMBA_ENABLED:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
