"""Backend switch for the compiled kernels.

Set ``STEERKIT_DISABLE_NUMBA=1`` before import to force the pure-numpy
paths. Both paths must produce the same numbers to rounding.
"""
import os

_flag = os.environ.get("STEERKIT_DISABLE_NUMBA", "").strip().lower()

try:
    if _flag in ("1", "true", "yes"):
        raise ImportError("numba disabled by STEERKIT_DISABLE_NUMBA")
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        import numba

        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
