"""
The AudioClip value type and WAV I/O.
"""

import logging
from pathlib import Path

import numpy as np
import soundfile as sf
from attrs import field, frozen

from ..exceptions import FormatError

logger = logging.getLogger(__name__)


def _as_samples(values) -> np.ndarray:
    """Coerce to a 1-D float32 buffer with finite values clamped to [-1, 1]."""
    samples = np.asarray(values, dtype=np.float32)
    if samples.ndim != 1:
        samples = samples.reshape(-1)
    samples = np.nan_to_num(samples, nan=0.0, posinf=1.0, neginf=-1.0)
    return np.clip(samples, -1.0, 1.0)


def _positive(_instance, attribute, value):
    if value <= 0:
        raise ValueError(f"{attribute.name} must be positive, got {value}")


@frozen(eq=False)
class AudioClip:
    """A mono sample buffer and its sample rate."""

    samples: np.ndarray = field(converter=_as_samples)
    sample_rate: int = field(converter=int, validator=_positive)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return len(self) / self.sample_rate

    def with_samples(self, samples, sample_rate: int | None = None) -> "AudioClip":
        """Return a clip with new samples, keeping the rate unless one is given."""
        return AudioClip(samples, sample_rate or self.sample_rate)


def load_wav(path) -> AudioClip:
    """
    Read a PCM or float WAV file as a mono clip.

    Multi-channel files are downmixed by averaging channels. Out-of-range
    samples are clamped on ingest.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Audio file not found: {path}")
    try:
        data, sample_rate = sf.read(str(path), dtype="float32", always_2d=True)
    except (sf.LibsndfileError, RuntimeError) as err:
        raise FormatError(f"Cannot read audio file {path}: {err}") from err
    logger.debug("[Audio] Loaded %s (%d samples, %d Hz, %d channels)", path, data.shape[0], sample_rate, data.shape[1])
    return AudioClip(data.mean(axis=1), sample_rate)


def write_wav(clip: AudioClip, path) -> Path:
    """Write ``clip`` as 16-bit PCM, creating parent directories as needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        sf.write(str(path), clip.samples, clip.sample_rate, subtype="PCM_16")
    except (sf.LibsndfileError, RuntimeError) as err:
        raise OSError(f"Cannot write audio file {path}: {err}") from err
    return path
