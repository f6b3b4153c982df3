"""Kernel backend selection.

The hot kernels (census transform, Hamming cost volume, SGM path
aggregation) exist twice: as numba @njit loops and as pure-numpy
vectorized code.  Both operate on integer cost accumulators, so their
outputs are bit-identical; the numba path is simply much faster.

The default backend is "numba" when numba imports cleanly.  Set the
environment variable PSEUDOLIDAR_BACKEND=numpy to force the fallback,
or call set_backend() at runtime (used by the backend benchmark).
"""

import os
import warnings

ENV_VAR = "PSEUDOLIDAR_BACKEND"
_VALID = ("numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _initial_backend() -> str:
    requested = os.environ.get(ENV_VAR, "numba").strip().lower()
    if requested not in _VALID:
        raise ValueError(f"{ENV_VAR} must be one of {_VALID}, got {requested!r}")
    if requested == "numba" and not _numba_available():
        warnings.warn("numba not importable, falling back to the numpy backend")
        return "numpy"
    return requested


_backend = _initial_backend()


def backend_name() -> str:
    return _backend


def use_numba() -> bool:
    return _backend == "numba"


def set_backend(name: str) -> None:
    """Switch kernel backend at runtime ("numba" or "numpy")."""
    global _backend
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _backend = name
