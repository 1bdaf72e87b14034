"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

__all__ = ["check_hurst", "check_positive", "check_interval", "as_float_array"]


def check_hurst(value: float, long_memory: bool = False) -> float:
    """Validate a Hurst index.

    Samplers accept any ``H`` in (0, 1).  The kernel-based operations and the
    estimators additionally require the long-memory regime ``H > 1/2``; pass
    ``long_memory=True`` there.
    """
    h = float(value)
    if not 0.0 < h < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {h}")
    if long_memory and h <= 0.5:
        raise ValueError(f"Hurst index must lie in (1/2, 1) here, got {h}")
    return h


def check_positive(name: str, value: float) -> float:
    v = float(value)
    if not v > 0.0:
        raise ValueError(f"{name} must be positive, got {value}")
    return v


def check_interval(lo: float, hi: float) -> tuple[float, float]:
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ValueError(f"interval endpoints must satisfy lo < hi, got [{lo}, {hi}]")
    return lo, hi


def as_float_array(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting non-finite entries."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be scalar or 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
