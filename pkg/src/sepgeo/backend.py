"""Kernel backend selection: numba JIT or pure NumPy/Python.

The hot kernels (event loops, clock replays, geodesic scans) are written once
and compiled with numba when available.  Set SEPGEO_BACKEND=numpy to force the
uncompiled fallback path; SEPGEO_BACKEND=numba fails loudly if numba is
missing.  The default ("auto") uses numba when importable.
"""

from __future__ import annotations

import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_choice = os.environ.get("SEPGEO_BACKEND", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"SEPGEO_BACKEND must be auto|numba|numpy, got {_choice!r}")
if _choice == "numba" and not HAVE_NUMBA:
    raise RuntimeError("SEPGEO_BACKEND=numba but numba is not importable")

USE_NUMBA = HAVE_NUMBA and _choice != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit_maybe(**kwargs):
    """@njit under the numba backend, identity decorator otherwise."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(**kwargs)

    def passthrough(func):
        return func

    return passthrough


if USE_NUMBA:
    prange = numba.prange
    get_thread_id = numba.get_thread_id
    get_num_threads = numba.get_num_threads
else:
    prange = range

    def get_thread_id() -> int:
        return 0

    def get_num_threads() -> int:
        return 1


def set_num_threads(n: int) -> None:
    if USE_NUMBA and n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def num_threads() -> int:
    if USE_NUMBA:
        return numba.get_num_threads()
    return 1
