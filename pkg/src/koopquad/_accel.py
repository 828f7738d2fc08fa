"""Switch between numba-compiled kernels and the plain numpy path.

Set ``KOOPQUAD_NO_NUMBA=1`` (or any of ``true``/``yes``) before import to run
every kernel as ordinary Python over numpy arrays.  The kernels are written so
both paths execute the same source.
"""
import os

_flag = os.environ.get("KOOPQUAD_NO_NUMBA", "").strip().lower()
DISABLED = _flag in ("1", "true", "yes", "on")

try:
    if DISABLED:
        raise ImportError
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise an identity decorator."""
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper
