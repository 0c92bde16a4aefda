"""Kernel backend selection: numba-compiled by default, interpreted fallback.

Both backends run the identical :func:`latgov.kernel.session_scan` source;
the numba path just compiles it. Selection order: explicit ``name``
argument, then the ``LATGOV_BACKEND`` environment variable (``numba``,
``numpy`` or ``auto``), then auto-detection.
"""

from __future__ import annotations

import os
from typing import Callable, Optional, Tuple

from . import kernel

BACKEND_ENV_VAR = "LATGOV_BACKEND"
BACKEND_CHOICES = ("auto", "numba", "numpy")

_compiled: dict = {}


class BackendError(RuntimeError):
    """Backend misconfiguration (unknown name or numba unavailable)."""


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _numba_scan() -> Callable:
    if "scan" not in _compiled:
        try:
            from numba import njit
        except ImportError as exc:
            raise BackendError("backend 'numba' requested but numba is not importable") from exc
        _compiled["scan"] = njit(cache=True, nogil=True)(kernel.session_scan)
    return _compiled["scan"]


def resolve(name: Optional[str] = None) -> Tuple[str, Callable]:
    """Return ``(backend_name, session_scan)`` for the requested backend."""
    requested = name or os.environ.get(BACKEND_ENV_VAR) or "auto"
    requested = requested.strip().lower()
    if requested not in BACKEND_CHOICES:
        raise BackendError(
            f"unknown backend {requested!r}; expected one of {BACKEND_CHOICES}"
        )
    if requested == "auto":
        requested = "numba" if numba_available() else "numpy"
    if requested == "numba":
        return "numba", _numba_scan()
    return "numpy", kernel.session_scan
