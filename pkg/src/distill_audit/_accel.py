"""Numba switch shared by every hot kernel.

Set ``DISTILL_AUDIT_NUMBA=0`` to force the pure-numpy fallbacks. The choice is
read once at import time; kernels modules pick their implementation then.
"""

import os

_FLAG = os.environ.get("DISTILL_AUDIT_NUMBA", "1").strip().lower()
USE_NUMBA = _FLAG not in ("0", "false", "no", "off")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when available, else the identity decorator.

    Always returns the compiled function so callers can still reach both
    paths explicitly (tests compare them).
    """
    kwargs.setdefault("cache", True)
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
