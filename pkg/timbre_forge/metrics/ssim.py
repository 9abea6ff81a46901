"""
Structural similarity between two grids.
"""

import functools

import numpy as np
from scipy.ndimage import correlate1d

from ..exceptions import ShapeError, SizeError

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DATA_RANGE = 1.0


@functools.lru_cache(maxsize=None)
def gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps; the 2-D window is their outer product."""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    taps = np.exp(-(offsets**2) / (2.0 * sigma**2))
    taps /= taps.sum()
    taps.setflags(write=False)
    return taps


def _local_mean(grid: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # Separable filtering, then keep only positions where the window fits.
    filtered = correlate1d(correlate1d(grid, taps, axis=0, mode="constant"), taps, axis=1, mode="constant")
    half = len(taps) // 2
    return filtered[half:grid.shape[0] - half, half:grid.shape[1] - half]


def ssim_map(a, b, data_range: float = DATA_RANGE) -> np.ndarray:
    """Local SSIM over every position where the 11x11 window fits inside both grids."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError("SSIM inputs differ in shape", expected=a.shape, got=b.shape)
    if a.ndim != 2 or min(a.shape) < WINDOW_SIZE:
        raise SizeError("SSIM needs 2-D grids of at least 11x11", expected=(WINDOW_SIZE, WINDOW_SIZE), got=a.shape)
    taps = gaussian_window()
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2

    mu_a = _local_mean(a, taps)
    mu_b = _local_mean(b, taps)
    var_a = _local_mean(a * a, taps) - mu_a * mu_a
    var_b = _local_mean(b * b, taps) - mu_b * mu_b
    cov = _local_mean(a * b, taps) - mu_a * mu_b

    numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    denominator = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return numerator / denominator


def ssim(a, b, data_range: float = DATA_RANGE) -> float:
    """Mean SSIM (Gaussian window 11x11, sigma 1.5, K1 0.01, K2 0.03)."""
    return float(np.mean(ssim_map(a, b, data_range)))
