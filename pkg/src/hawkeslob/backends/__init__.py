"""Kernel backend selection.

The likelihood/compensator recursions are the hot loops of calibration; a
compiled extension (`native`, Cython) is preferred when built, with a pure
numpy implementation as fallback.  Set HAWKESLOB_BACKEND=pure|native to force
a choice (native raises if the extension is missing).
"""

from __future__ import annotations

import os

import numpy as np

_choice = os.environ.get("HAWKESLOB_BACKEND", "auto")
if _choice not in ("auto", "native", "pure"):
    raise RuntimeError(f"HAWKESLOB_BACKEND must be auto|native|pure, got {_choice!r}")

if _choice == "pure":
    from . import pure as kernels

    BACKEND = "pure"
else:
    try:
        from . import native as kernels  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        if _choice == "native":
            raise
        from . import pure as kernels

        BACKEND = "pure"


def prepare_events(times, types) -> tuple[np.ndarray, np.ndarray]:
    """Normalise event arrays for the kernels: float64 times, 0-based int32 types."""
    t = np.ascontiguousarray(times, dtype=np.float64)
    z = np.ascontiguousarray(np.asarray(types, dtype=np.int64) - 1, dtype=np.int32)
    return t, z


loglik_terms = kernels.loglik_terms
compensators_at_events = kernels.compensators_at_events
