"""Optional numba acceleration.

Set ``FEW_DISABLE_NUMBA=1`` in the environment to force the pure-numpy
kernels even when numba is installed. The flag is read once at import.
"""
import os

_disabled = os.environ.get("FEW_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _disabled


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _njit(*args, **kwargs)
