"""Numba switch.

Hot kernels are written twice: an explicit-loop version compiled with
``numba.njit`` and a vectorised numpy version.  Setting the environment
variable ``DRIFTSTOP_NO_NUMBA=1`` (or running without numba installed) selects
the numpy path everywhere.
"""
import os

_flag = os.environ.get("DRIFTSTOP_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def njit(func):
    """Compile ``func`` in nopython mode when numba is importable, else return it as is."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def pick(jitted, fallback):
    return jitted if USE_NUMBA else fallback
