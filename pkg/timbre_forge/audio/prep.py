"""
Preprocessing steps applied to every clip before analysis.

The order is fixed: resample to the pipeline rate, raise quiet clips to the
target RMS level, then zero out long silences.
"""

import logging
import math
import warnings

import numpy as np
from attrs import field, frozen, validators
from scipy.signal import resample_poly

from .. import settings
from ..exceptions import ConfigError, EmptyAudio, ZeroEnergyWarning
from .clip import AudioClip

logger = logging.getLogger(__name__)


@frozen
class PreprocessConfig:
    """Parameters of the three preprocessing steps."""

    target_rate: int = field(default=settings.SAMPLE_RATE, validator=validators.gt(0))
    target_db: float = field(default=settings.TARGET_DB, converter=float)
    frame_ms: float = field(default=settings.SILENCE_FRAME_MS, converter=float, validator=validators.gt(0))
    threshold_db: float = field(default=settings.SILENCE_THRESHOLD_DB, converter=float)
    min_gap_ms: float = field(default=settings.SILENCE_MIN_GAP_MS, converter=float)

    @min_gap_ms.validator
    def _check_gap(self, _attribute, value):
        if value < self.frame_ms:
            raise ConfigError("Invalid silence settings", {"min_gap_ms": "must be at least frame_ms"})


def rms_db(samples: np.ndarray) -> float:
    """RMS level of ``samples`` in dBFS (``-inf`` for silence)."""
    rms = math.sqrt(float(np.mean(np.square(samples, dtype=np.float64)))) if samples.size else 0.0
    return 20.0 * math.log10(rms) if rms > 0 else float("-inf")


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """
    Resample with a polyphase windowed-sinc filter.

    Returns ``clip`` itself when the rates already match.
    """
    if len(clip) == 0:
        raise EmptyAudio("Cannot resample an empty clip")
    if target_rate <= 0:
        raise ConfigError("Invalid target rate", {"target_rate": f"must be positive, got {target_rate}"})
    if clip.sample_rate == target_rate:
        return clip
    divisor = math.gcd(clip.sample_rate, int(target_rate))
    up, down = int(target_rate) // divisor, clip.sample_rate // divisor
    samples = resample_poly(clip.samples.astype(np.float64), up, down)
    logger.debug("[Preprocess] Resampled %d Hz -> %d Hz (%d -> %d samples)",
                 clip.sample_rate, target_rate, len(clip), samples.shape[0])
    return AudioClip(samples, target_rate)


def rms_normalize(clip: AudioClip, target_db: float = settings.TARGET_DB) -> AudioClip:
    """
    Raise the clip's RMS level to ``target_db`` if it is below it.

    Clips at or above the target are returned unchanged. An all-zero clip is
    returned unchanged with a ZeroEnergyWarning since no gain can fix it.
    """
    if len(clip) == 0:
        raise EmptyAudio("Cannot normalize an empty clip")
    current_db = rms_db(clip.samples)
    if current_db == float("-inf"):
        warnings.warn("Clip has zero energy; RMS normalization skipped", ZeroEnergyWarning, stacklevel=2)
        logger.warning("[Preprocess] Zero-energy clip left unnormalized")
        return clip
    if current_db >= target_db:
        return clip
    gain = 10.0 ** ((target_db - current_db) / 20.0)
    return clip.with_samples(clip.samples.astype(np.float64) * gain)


def _silent_runs(silent: np.ndarray):
    """Yield (start, stop) frame index pairs of consecutive True values."""
    padded = np.concatenate(([False], silent, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return zip(edges[0::2], edges[1::2])


def mask_silence(
    clip: AudioClip,
    frame_ms: float = settings.SILENCE_FRAME_MS,
    threshold_db: float = settings.SILENCE_THRESHOLD_DB,
    min_gap_ms: float = settings.SILENCE_MIN_GAP_MS,
) -> AudioClip:
    """
    Zero out long runs of quiet frames.

    The clip is cut into non-overlapping frames of ``frame_ms``. Runs of frames
    whose RMS is below ``threshold_db`` and which last at least ``min_gap_ms``
    are replaced by exact zeros. Length and all other samples are preserved.
    """
    if frame_ms <= 0:
        raise ConfigError("Invalid silence settings", {"frame_ms": "must be positive"})
    if min_gap_ms < frame_ms:
        raise ConfigError("Invalid silence settings", {"min_gap_ms": "must be at least frame_ms"})
    n_samples = len(clip)
    if n_samples == 0:
        return clip

    frame_len = max(1, int(round(frame_ms * clip.sample_rate / 1000.0)))
    n_frames = -(-n_samples // frame_len)
    padded = np.zeros(n_frames * frame_len, dtype=np.float64)
    padded[:n_samples] = clip.samples
    frames = padded.reshape(n_frames, frame_len)
    # the last frame may be partial; average over its real samples only
    counts = np.full(n_frames, frame_len, dtype=np.float64)
    counts[-1] = n_samples - (n_frames - 1) * frame_len
    rms = np.sqrt(np.sum(frames * frames, axis=1) / counts)
    with np.errstate(divide="ignore"):
        level_db = 20.0 * np.log10(rms)
    silent = level_db < threshold_db

    masked = clip.samples.copy()
    zeroed = 0
    for start, stop in _silent_runs(silent):
        begin, end = start * frame_len, min(stop * frame_len, n_samples)
        if (end - begin) * 1000.0 / clip.sample_rate >= min_gap_ms:
            masked[begin:end] = 0.0
            zeroed += end - begin
    if zeroed == 0:
        return clip
    logger.debug("[Preprocess] Masked %d silent samples of %d", zeroed, n_samples)
    return clip.with_samples(masked)


def preprocess_clip(clip: AudioClip, cfg: PreprocessConfig | None = None) -> AudioClip:
    """Resample, RMS-normalize and silence-mask ``clip``."""
    cfg = cfg or PreprocessConfig()
    clip = resample(clip, cfg.target_rate)
    clip = rms_normalize(clip, cfg.target_db)
    return mask_silence(clip, cfg.frame_ms, cfg.threshold_db, cfg.min_gap_ms)
