"""Backend selection for the hot simulation kernels.

Set ``SUBDRIFT_BACKEND=numpy`` to force the vectorized numpy fallback.  The
variable is read at call time, so tests may flip it with ``monkeypatch``.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def njit(fn):
    """``numba.njit(cache=True, nogil=True)`` or the identity without numba."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend() -> str:
    requested = os.environ.get("SUBDRIFT_BACKEND", "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"SUBDRIFT_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        return "numpy"
    return requested
