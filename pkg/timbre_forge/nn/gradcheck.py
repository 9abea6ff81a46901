"""
Central finite-difference gradients for checking the analytic backward passes.
"""

from collections.abc import Callable

import numpy as np

FD_STEP = 1e-4


def numerical_gradient(func: Callable[[], float], array: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """
    Gradient of the scalar ``func()`` with respect to ``array``.

    ``array`` is perturbed in place, one element at a time, and restored.
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + step
        plus = func()
        flat[index] = original - step
        minus = func()
        flat[index] = original
        out[index] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest absolute difference scaled by the largest gradient magnitude."""
    scale = max(float(np.abs(analytic).max(initial=0.0)), float(np.abs(numeric).max(initial=0.0)), 1e-12)
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale
