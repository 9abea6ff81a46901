"""
Phase reconstruction with the accelerated Griffin-Lim iteration.
"""

import logging

import librosa
import numpy as np

from .. import settings
from ..audio.clip import AudioClip
from ..exceptions import ConfigError, ShapeError
from .transforms import StftConfig

logger = logging.getLogger(__name__)


def _spectral_convergence(estimate: np.ndarray, target: np.ndarray, target_norm: float) -> float:
    if target_norm == 0.0:
        return 0.0
    return float(np.linalg.norm(np.abs(estimate) - target) / target_norm)


def _check_schedule(iterations: int, momentum: float):
    errors = {}
    if iterations < 1:
        errors["iterations"] = f"must be at least 1, got {iterations}"
    if not 0.0 <= momentum < 1.0:
        errors["momentum"] = f"must lie in [0, 1), got {momentum}"
    if errors:
        raise ConfigError("Invalid Griffin-Lim schedule", errors)


def reconstruct_phase(
    magnitude: np.ndarray,
    cfg: StftConfig | None = None,
    iterations: int = settings.GRIFFIN_LIM_ITERS,
    momentum: float = settings.GRIFFIN_LIM_MOMENTUM,
) -> tuple[AudioClip, list[float]]:
    """
    Run accelerated Griffin-Lim from zero phase.

    Every iteration synthesises a candidate signal. The candidate with the
    lowest spectral convergence error is returned, so running more iterations
    on the same grid never ends with a higher error.

    Args:
        magnitude: linear magnitudes, frames x (n_fft/2 + 1).
        cfg: STFT geometry; must match the one that produced ``magnitude``.
        iterations: number of projection rounds, at least 1.
        momentum: acceleration factor in [0, 1); 0 gives plain Griffin-Lim.

    Returns:
        The reconstructed clip of ``frames * hop`` samples, and the spectral
        convergence error of each candidate followed by the error of the
        returned clip.
    """
    cfg = cfg or StftConfig()
    _check_schedule(iterations, momentum)
    magnitude = np.asarray(magnitude, dtype=np.float64)
    if magnitude.ndim != 2 or magnitude.shape[1] != cfg.n_bins:
        raise ShapeError(
            "Magnitude grid must be frames x bins", expected=f"(frames, {cfg.n_bins})", got=magnitude.shape
        )
    target = magnitude.T
    n_frames = target.shape[1]
    length = n_frames * cfg.hop
    target_norm = float(np.linalg.norm(target))

    def analyse(signal):
        spectrum = librosa.stft(
            signal, n_fft=cfg.n_fft, hop_length=cfg.hop, window="hann", center=cfg.center, pad_mode="reflect"
        )
        return spectrum[:, :n_frames]

    def synthesise(spectrum):
        return librosa.istft(
            spectrum, hop_length=cfg.hop, n_fft=cfg.n_fft, window="hann", center=cfg.center, length=length
        )

    errors = []
    best_signal, best_error = None, np.inf
    accelerated = target.astype(np.complex128)
    previous = accelerated
    for _ in range(iterations):
        signal = synthesise(accelerated)
        projected = analyse(signal)
        error = _spectral_convergence(projected, target, target_norm)
        errors.append(error)
        if error < best_error:
            best_signal, best_error = signal, error
        rebuilt = target * np.exp(1j * np.angle(projected))
        accelerated = rebuilt + momentum * (rebuilt - previous)
        previous = rebuilt

    errors.append(best_error)
    logger.debug("[GriffinLim] %d iterations, spectral convergence %.4f -> %.4f", iterations, errors[0], best_error)
    return AudioClip(best_signal, cfg.sample_rate), errors


def fast_griffin_lim(
    magnitude: np.ndarray,
    cfg: StftConfig | None = None,
    iterations: int = settings.GRIFFIN_LIM_ITERS,
    momentum: float = settings.GRIFFIN_LIM_MOMENTUM,
) -> AudioClip:
    """Reconstruct a waveform from a magnitude grid."""
    clip, _ = reconstruct_phase(magnitude, cfg, iterations, momentum)
    return clip
