"""
Mel-spectrogram analysis, inversion and rendering.
"""

from .griffin_lim import fast_griffin_lim, reconstruct_phase
from .io import load_mel, save_mel, write_image, write_panel
from .transforms import (
    MelSpectrogram,
    StftConfig,
    denormalize,
    invert_mel,
    log_mel,
    mel_center_frequencies,
    mel_filterbank,
    mel_spectrogram,
    normalize_with,
    stft_magnitude,
)

__all__ = [
    "MelSpectrogram",
    "StftConfig",
    "denormalize",
    "fast_griffin_lim",
    "invert_mel",
    "load_mel",
    "log_mel",
    "mel_center_frequencies",
    "mel_filterbank",
    "mel_spectrogram",
    "normalize_with",
    "reconstruct_phase",
    "save_mel",
    "stft_magnitude",
    "write_image",
    "write_panel",
]
