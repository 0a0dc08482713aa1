"""Kernel backend selection.

The hot numeric kernels (branch-and-bound search, batched constraint
evaluation, exhaustive 0-1 enumeration) are written once as plain Python
over numpy arrays and compiled with numba's ``@njit`` when available.

Set ``NHOPT_BACKEND=python`` to force the interpreted numpy fallback
(useful for debugging and for the backend comparison benchmark), or
``NHOPT_BACKEND=numba`` to require the compiled path. The default is
numba when importable, python otherwise.
"""

from __future__ import annotations

import os
import warnings

_ENV_VAR = "NHOPT_BACKEND"


def _resolve() -> str:
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested not in ("", "numba", "python"):
        raise ValueError(
            f"{_ENV_VAR} must be 'numba' or 'python', got {requested!r}"
        )
    if requested == "python":
        return "python"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        warnings.warn("numba not importable, falling back to the pure-python backend")
        return "python"
    return "numba"


BACKEND = _resolve()


def jit(func):
    """Compile ``func`` with numba, or return it unchanged on the python backend."""
    if BACKEND == "numba":
        from numba import njit

        return njit(cache=True)(func)
    return func


def backend_name() -> str:
    return BACKEND
