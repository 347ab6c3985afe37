"""Optional numba acceleration.

Hot kernels are written as plain loops and decorated with :func:`njit`.
When numba is missing, or ``SVPE_DISABLE_NUMBA=1`` is set, ``njit`` is a
no-op and callers switch to their vectorised numpy route instead.
"""
import os


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def _have_numba():
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        return False


HAVE_NUMBA = _have_numba()
DISABLED = os.environ.get("SVPE_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")
USE_NUMBA = HAVE_NUMBA and not DISABLED

if USE_NUMBA:
    from numba import njit
else:
    njit = _noop_jit


def resolve_backend(backend=None):
    """Map ``None``/"auto" to the active backend name ("numba" or "numpy")."""
    if backend in (None, "auto"):
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not USE_NUMBA:
        raise RuntimeError("numba backend requested but numba is disabled or missing")
    return backend
