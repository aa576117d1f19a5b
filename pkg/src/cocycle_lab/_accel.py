"""Optional numba acceleration.

Kernels are written once in plain Python/NumPy style and compiled with
``numba.njit`` when available.  Setting ``COCYCLE_LAB_NUMBA=0`` in the
environment (before import) selects the vectorized pure-NumPy twins instead.
"""

from __future__ import annotations

import os

_flag = os.environ.get("COCYCLE_LAB_NUMBA", "1").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _flag not in ("0", "false", "no", "off")


def njit(func=None, **kwargs):
    """``numba.njit(cache=True, nogil=True)`` if numba is importable, else identity."""
    opts = {"cache": True, "nogil": True}
    opts.update(kwargs)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        import numba

        return numba.njit(**opts)(f)

    if func is None:
        return wrap
    return wrap(func)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
