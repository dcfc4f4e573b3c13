"""Refinement studies: fitted orders and Richardson extrapolation."""
from __future__ import annotations

from typing import Sequence

import numpy as np


def fitted_order(h: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log|values| against log h."""
    h = np.asarray(h, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if h.size < 2 or h.size != v.size:
        raise ValueError("need at least two (h, value) pairs of equal length")
    if np.any(v <= 0) or np.any(h <= 0):
        raise ValueError("h and |values| must be positive for a log-log fit")
    slope, _ = np.polyfit(np.log(h), np.log(v), 1)
    return float(slope)


def observed_order(coarse: float, medium: float, fine: float, ratio: float = 2.0) -> float:
    """Order p from three values on meshes refined by ``ratio``."""
    d1, d2 = medium - coarse, fine - medium
    if d1 == 0 or d2 == 0 or d1 * d2 < 0:
        return float("nan")
    return float(np.log(abs(d1 / d2)) / np.log(ratio))


def richardson(values: Sequence[float], ratio: float = 2.0, order: float | None = None) -> float:
    """Extrapolated limit of a sequence computed on successively refined meshes.

    With ``order`` given, the last two values are combined; otherwise the
    order is estimated from the last three and the estimate falls back to the
    finest value when the sequence is not in its asymptotic regime.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least two values")
    if order is None:
        if v.size < 3:
            raise ValueError("need three values to estimate the order")
        order = observed_order(v[-3], v[-2], v[-1], ratio)
        if not np.isfinite(order) or order <= 0:
            return float(v[-1])
    f = ratio**order
    return float(v[-1] + (v[-1] - v[-2]) / (f - 1.0))


def monotone_decreasing(values: Sequence[float]) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))
