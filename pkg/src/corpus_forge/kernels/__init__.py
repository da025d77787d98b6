"""Hot numeric kernels with two interchangeable backends.

``numba`` (default when importable) compiles the inner loops; ``numpy`` is a
pure-numpy path with identical results. Select with the environment variable
``CORPUS_FORGE_BACKEND=numba|numpy``; the choice is made once at import time.
"""
from __future__ import annotations

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

BACKEND_ENV = "CORPUS_FORGE_BACKEND"
#: Returned by :func:`prefix_distances` for rows abandoned by the early exit.
ABANDONED = _numpy.ABANDONED


def _load_numba():
    try:
        from . import _numba
    except ImportError:  # numba not installed
        return None
    return _numba


def _select(name: str | None):
    name = (name or "numba").strip().lower()
    if name == "numpy":
        return _numpy, "numpy"
    if name != "numba":
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {name!r}")
    mod = _load_numba()
    if mod is None:
        log.info("numba unavailable, falling back to numpy kernels")
        return _numpy, "numpy"
    return mod, "numba"


_impl, BACKEND = _select(os.environ.get(BACKEND_ENV))


def implementation(name: str):
    """Return the kernel module for ``name`` regardless of the active backend."""
    mod, actual = _select(name)
    if actual != name:
        raise ImportError(f"backend {name!r} is not available")
    return mod


edit_distance = _impl.edit_distance
cross_distances = _impl.cross_distances
prefix_distances = _impl.prefix_distances
frame_stats = _impl.frame_stats

__all__ = [
    "ABANDONED",
    "BACKEND",
    "cross_distances",
    "edit_distance",
    "frame_stats",
    "implementation",
    "prefix_distances",
]
