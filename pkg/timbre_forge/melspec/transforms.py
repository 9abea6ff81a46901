"""
Forward and inverse mel-spectrogram transforms.

Grids are laid out frames x bins. Mel grids are log-scaled and min-max
normalized into [0, 1]; the pre-normalization extrema travel with the grid so
it can be inverted later.
"""

import functools
import logging

import librosa
import numpy as np
from attrs import field, frozen, validators
from scipy.optimize import nnls

from .. import settings
from ..audio.clip import AudioClip
from ..exceptions import (
    ConfigError,
    EmptyAudio,
    MissingStats,
    NumericalError,
    ShapeError,
    ShortAudio,
)

logger = logging.getLogger(__name__)


@frozen
class StftConfig:
    """STFT and mel projection geometry."""

    n_fft: int = field(default=settings.N_FFT, validator=validators.gt(0))
    hop: int = field(default=settings.HOP_LENGTH, validator=validators.gt(0))
    n_mels: int = field(default=settings.N_MELS, validator=validators.gt(0))
    sample_rate: int = field(default=settings.SAMPLE_RATE, validator=validators.gt(0))
    center: bool = True

    def __attrs_post_init__(self):
        errors = {}
        if self.hop > self.n_fft:
            errors["hop"] = f"must not exceed n_fft ({self.n_fft})"
        if self.n_mels > self.n_bins:
            errors["n_mels"] = f"must not exceed n_fft/2 + 1 ({self.n_bins})"
        if errors:
            raise ConfigError("Invalid STFT configuration", errors)

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1


def _check_values(_instance, _attribute, value):
    if value.ndim != 2 or value.shape[1] != settings.N_MELS:
        raise ShapeError("Mel grid must be frames x mel bins", expected=f"(frames, {settings.N_MELS})", got=value.shape)
    if value.size and (value.min() < 0.0 or value.max() > 1.0):
        raise ValueError("Mel values must lie in [0, 1]")


@frozen(eq=False)
class MelSpectrogram:
    """A normalized log-mel grid plus the statistics needed to undo the normalization."""

    values: np.ndarray = field(converter=lambda v: np.asarray(v, dtype=np.float32), validator=_check_values)
    norm_min: float | None = None
    norm_max: float | None = None
    sample_rate: int = settings.SAMPLE_RATE
    hop: int = settings.HOP_LENGTH

    def __attrs_post_init__(self):
        if self.has_stats and self.norm_max < self.norm_min:
            raise ValueError(f"norm_max ({self.norm_max}) is below norm_min ({self.norm_min})")

    @property
    def has_stats(self) -> bool:
        return self.norm_min is not None and self.norm_max is not None

    @property
    def frames(self) -> int:
        return int(self.values.shape[0])

    def with_values(self, values) -> "MelSpectrogram":
        """Return a grid with new values and the same statistics."""
        return MelSpectrogram(values, self.norm_min, self.norm_max, self.sample_rate, self.hop)


def stft_magnitude(clip: AudioClip, cfg: StftConfig | None = None) -> np.ndarray:
    """
    Magnitude STFT with a Hann window, shaped frames x (n_fft/2 + 1).

    With ``center`` the signal is reflect-padded and the trailing partial frame
    is dropped, so the frame count is ``len // hop``.
    """
    cfg = cfg or StftConfig()
    n_samples = len(clip)
    if cfg.center:
        if n_samples == 0:
            raise EmptyAudio("Cannot analyse an empty clip")
        n_frames = n_samples // cfg.hop
        if n_frames == 0:
            raise ShortAudio(f"Clip has {n_samples} samples; at least {cfg.hop} are required", cfg.hop, n_samples)
    else:
        if n_samples < cfg.n_fft:
            raise ShortAudio(f"Clip has {n_samples} samples; at least {cfg.n_fft} are required", cfg.n_fft, n_samples)
        n_frames = 1 + (n_samples - cfg.n_fft) // cfg.hop
    spectrum = librosa.stft(
        clip.samples.astype(np.float64),
        n_fft=cfg.n_fft,
        hop_length=cfg.hop,
        window="hann",
        center=cfg.center,
        pad_mode="reflect",
    )
    return np.abs(spectrum[:, :n_frames]).T


@functools.lru_cache(maxsize=8)
def _filterbank(cfg: StftConfig) -> np.ndarray:
    bank = librosa.filters.mel(
        sr=cfg.sample_rate,
        n_fft=cfg.n_fft,
        n_mels=cfg.n_mels,
        fmin=0.0,
        fmax=cfg.sample_rate / 2.0,
        htk=True,
        norm=None,
        dtype=np.float64,
    )
    empty = np.flatnonzero(bank.sum(axis=1) <= 0)
    if empty.size:
        raise NumericalError(f"Mel filters {empty.tolist()} have no support at n_fft={cfg.n_fft}")
    bank.setflags(write=False)
    return bank


def mel_filterbank(cfg: StftConfig | None = None) -> np.ndarray:
    """Triangular HTK mel filters spanning 0 Hz to Nyquist, shaped n_mels x (n_fft/2 + 1)."""
    return _filterbank(cfg or StftConfig())


def mel_center_frequencies(cfg: StftConfig | None = None) -> np.ndarray:
    """Center frequency in Hz of each mel filter."""
    cfg = cfg or StftConfig()
    edges = librosa.mel_frequencies(cfg.n_mels + 2, fmin=0.0, fmax=cfg.sample_rate / 2.0, htk=True)
    return edges[1:-1]


def log_mel(clip: AudioClip, cfg: StftConfig | None = None) -> np.ndarray:
    """Pre-normalization log-mel grid, frames x n_mels."""
    cfg = cfg or StftConfig()
    magnitude = stft_magnitude(clip, cfg)
    return np.log(magnitude @ mel_filterbank(cfg).T + settings.LOG_FLOOR)


def normalize_with(log_grid: np.ndarray, norm_min: float, norm_max: float) -> np.ndarray:
    """Min-max normalize with given statistics, clipping into [0, 1]. A degenerate range maps to 0.5."""
    if norm_max <= norm_min:
        return np.full(log_grid.shape, 0.5, dtype=np.float32)
    scaled = (log_grid - norm_min) / (norm_max - norm_min)
    return np.clip(scaled, 0.0, 1.0).astype(np.float32)


def mel_spectrogram(
    clip: AudioClip, cfg: StftConfig | None = None, stats: tuple[float, float] | None = None
) -> MelSpectrogram:
    """
    Log-mel spectrogram normalized into [0, 1].

    Without ``stats`` the grid is normalized by its own extrema; with
    ``stats`` (for example per-domain extrema) those are used instead.
    """
    cfg = cfg or StftConfig()
    grid = log_mel(clip, cfg)
    norm_min, norm_max = stats if stats is not None else (float(grid.min()), float(grid.max()))
    return MelSpectrogram(normalize_with(grid, norm_min, norm_max), norm_min, norm_max, cfg.sample_rate, cfg.hop)


def denormalize(mel: MelSpectrogram) -> np.ndarray:
    """Recover the log-mel grid from its normalized values."""
    if not mel.has_stats:
        raise MissingStats("Mel-spectrogram has no normalization statistics")
    return mel.values.astype(np.float64) * (mel.norm_max - mel.norm_min) + mel.norm_min


def invert_mel(mel: MelSpectrogram, cfg: StftConfig | None = None, method: str = "nnls") -> np.ndarray:
    """
    Estimate a linear magnitude grid (frames x bins) whose mel projection matches ``mel``.

    ``nnls`` solves a non-negative least-squares problem per frame; ``pinv``
    applies the filterbank pseudo-inverse and clamps at zero.
    """
    cfg = cfg or StftConfig()
    mel_magnitude = np.maximum(np.exp(denormalize(mel)) - settings.LOG_FLOOR, 0.0)
    bank = mel_filterbank(cfg)
    if method == "pinv":
        return np.maximum(mel_magnitude @ np.linalg.pinv(bank).T, 0.0)
    if method != "nnls":
        raise ConfigError("Unknown mel inversion method", {"method": method})

    magnitude = np.empty((mel_magnitude.shape[0], bank.shape[1]), dtype=np.float64)
    solved: dict[bytes, np.ndarray] = {}
    for index, row in enumerate(mel_magnitude):
        key = row.tobytes()
        if key not in solved:
            solved[key] = nnls(bank, row, maxiter=50 * bank.shape[1])[0]
        magnitude[index] = solved[key]
    return magnitude
