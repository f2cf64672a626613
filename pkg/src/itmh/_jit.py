"""JIT backend selection.

The hot simulation loops in :mod:`itmh.kernels` come in two flavours: a
numba ``@njit`` version and a vectorized pure-numpy version.  The numpy
path is the fallback when numba is unavailable and can be forced with the
environment variable ``ITMH_DISABLE_JIT=1`` (useful for debugging and for
the backend benchmark).
"""

import os

_DISABLED = os.environ.get("ITMH_DISABLE_JIT", "0").lower() in ("1", "true", "yes")

try:
    from numba import njit  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


JIT_ENABLED = HAVE_NUMBA and not _DISABLED


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if JIT_ENABLED else "numpy"
