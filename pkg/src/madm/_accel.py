"""Numba switch.

The hot kernels exist twice: a numba-compiled version and a pure numpy/Python
version. ``MADM_DISABLE_NUMBA=1`` (or a missing numba install) selects the
fallback. Both versions stay importable so they can be benchmarked and
cross-checked against each other.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("MADM_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes", "on")

HAVE_NUMBA = numba is not None
NUMBA_ENABLED = HAVE_NUMBA and not _DISABLED


def njit(**kwargs):
    """``numba.njit`` with cache/nogil defaults, or identity without numba."""
    opts = {"cache": True, "nogil": True}
    opts.update(kwargs)

    def deco(fn):
        if not HAVE_NUMBA:
            return fn
        return numba.njit(**opts)(fn)

    return deco
