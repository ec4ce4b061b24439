"""Kernel backend selection.

The hot loops in :mod:`viouter.kernels` exist twice: a vectorized numpy
implementation and a loop form compiled with numba. The active backend is
chosen once at import time from the ``VIOUTER_BACKEND`` environment variable:

* unset: numba when importable, numpy otherwise
* ``VIOUTER_BACKEND=numpy``: force the pure-numpy path
* ``VIOUTER_BACKEND=numba``: require numba, fail loudly if missing
"""
from __future__ import annotations

import os

ENV_VAR = "VIOUTER_BACKEND"
_CHOICES = ("numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend() -> str:
    choice = os.environ.get(ENV_VAR, "").strip().lower()
    if choice and choice not in _CHOICES:
        raise ValueError(
            f"{ENV_VAR}={choice!r} is not recognized; use one of {_CHOICES}"
        )
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not _numba_available():
            raise RuntimeError(
                f"{ENV_VAR}=numba was requested but numba is not importable"
            )
        return "numba"
    return "numba" if _numba_available() else "numpy"


BACKEND: str = resolve_backend()
