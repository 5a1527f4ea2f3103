"""Switch between numba-compiled hot loops and their pure-numpy twins.

Set ``KGLAB_DISABLE_NUMBA=1`` to force the numpy path (useful for debugging
and for machines without a working LLVM).
"""
import os
import warnings

_FLAG = os.environ.get("KGLAB_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in ("1", "true", "yes", "on")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator

    warnings.warn("numba could not be imported; hot loops fall back to numpy")

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def backend():
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"
