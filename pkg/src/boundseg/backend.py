"""Selects the spatial-kernel implementation: numba JIT or numpy fallback.

The BOUNDSEG_BACKEND environment variable forces a backend ("numba" or
"numpy"). Unset, numba is used when importable and numpy otherwise.
"""

from __future__ import annotations

import os

ENV_VAR = "BOUNDSEG_BACKEND"
BACKENDS = ("numba", "numpy")

_active: str | None = None


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _resolve() -> str:
    value = os.environ.get(ENV_VAR, "").strip().lower()
    if value:
        if value not in BACKENDS:
            raise ValueError(f"{ENV_VAR} must be one of {BACKENDS}, got {value!r}")
        if value == "numba" and not numba_available():
            raise ImportError(f"{ENV_VAR}=numba but numba is not importable")
        return value
    return "numba" if numba_available() else "numpy"


def active_backend() -> str:
    global _active
    if _active is None:
        _active = _resolve()
    return _active


def set_backend(name: str) -> None:
    """Override the active backend (used by tests and benchmarks)."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not numba_available():
        raise ImportError("numba backend requested but numba is not importable")
    _active = name
