"""Kernel backend selection.

Hot loops have a numba implementation and a pure-numpy fallback. The
``SYMENC_BACKEND`` environment variable picks one at import time
(``numba`` by default, ``numpy`` to disable JIT); :func:`use_backend`
switches at runtime, which the tests and benchmarks rely on.
"""

from __future__ import annotations

import contextlib
import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_requested = os.environ.get("SYMENC_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"SYMENC_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

_state = {"name": _requested if HAS_NUMBA else "numpy"}


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, else identity."""
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def backend() -> str:
    return _state["name"]


def set_backend(name: str) -> None:
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    _state["name"] = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def dispatch(numba_impl, numpy_impl):
    """Build a function that forwards to the active backend's implementation."""

    def call(*args):
        if _state["name"] == "numba":
            return numba_impl(*args)
        return numpy_impl(*args)

    call.__name__ = numpy_impl.__name__.replace("_numpy", "")
    call.__doc__ = numpy_impl.__doc__
    return call
