"""
Gaussian fits of embedding sets and the Frechet distance between them.
"""

import numpy as np
from attrs import field, frozen
from scipy import linalg

from ..exceptions import InsufficientData, NumericalError, ShapeError


@frozen(eq=False)
class GaussianStats:
    """Mean, covariance and sample count of an embedding set."""

    mean: np.ndarray = field(converter=lambda v: np.atleast_1d(np.asarray(v, dtype=np.float64)))
    covariance: np.ndarray = field(converter=lambda v: np.atleast_2d(np.asarray(v, dtype=np.float64)))
    count: int = 2

    def __attrs_post_init__(self):
        d = self.mean.shape[0]
        if self.mean.ndim != 1 or self.covariance.shape != (d, d):
            raise ShapeError("Covariance must be square and match the mean", expected=(d, d), got=self.covariance.shape)
        if not np.allclose(self.covariance, self.covariance.T, rtol=0.0, atol=1e-8):
            raise ValueError("Covariance is not symmetric")
        if self.count < 2:
            raise InsufficientData(f"Gaussian statistics need at least 2 samples, got {self.count}")

    @property
    def dimension(self) -> int:
        return int(self.mean.shape[0])


def fit_gaussian(embeddings) -> GaussianStats:
    """Sample mean and unbiased covariance, symmetrized."""
    data = np.asarray(embeddings, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, np.newaxis] if data.size else data.reshape(0, 0)
    if data.shape[0] < 2:
        raise InsufficientData(f"Fitting a Gaussian needs at least 2 embeddings, got {data.shape[0]}")
    covariance = np.atleast_2d(np.cov(data, rowvar=False, ddof=1))
    return GaussianStats(data.mean(axis=0), 0.5 * (covariance + covariance.T), data.shape[0])


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = linalg.eigh(0.5 * (matrix + matrix.T))
    return (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.T


def frechet_distance(s1: GaussianStats, s2: GaussianStats) -> float:
    """
    ``|mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2))``, clamped at zero.

    The trace of ``(S1 S2)^(1/2)`` is taken as the sum of square roots of the
    (clamped) eigenvalues of ``S1^(1/2) S2 S1^(1/2)``, which is symmetric and
    has the same spectrum.
    """
    if s1.dimension != s2.dimension:
        raise ShapeError("Embedding dimensions differ", expected=s1.dimension, got=s2.dimension)
    root = _psd_sqrt(s1.covariance)
    product = root @ s2.covariance @ root
    eigenvalues = linalg.eigvalsh(0.5 * (product + product.T))
    trace_sqrt = float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))))
    diff = s1.mean - s2.mean
    distance = float(diff @ diff + np.trace(s1.covariance) + np.trace(s2.covariance) - 2.0 * trace_sqrt)
    if not np.isfinite(distance):
        raise NumericalError("Frechet distance is not finite")
    return max(distance, 0.0)
