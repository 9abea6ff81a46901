"""
Mel-spectrogram persistence: grayscale PNG renderings and the binary grid cache.
"""

import logging
import struct
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from PIL import Image

from .. import settings
from ..exceptions import FormatError, VersionError
from .transforms import MelSpectrogram

logger = logging.getLogger(__name__)

MEL_MAGIC = b"MELS"
MEL_VERSION = 1
# magic, version, frames, mel bins, norm_min, norm_max
_HEADER = struct.Struct("<4sIIIff")
PANEL_GUTTER = 1


def _to_pixels(mel: MelSpectrogram) -> np.ndarray:
    pixels = np.rint(np.clip(mel.values, 0.0, 1.0) * 255.0).astype(np.uint8)
    # Rows become mel bins with the lowest frequency at the bottom.
    return np.flipud(pixels.T)


def write_image(mel: MelSpectrogram, path) -> Path:
    """Render a mel grid as an 8-bit grayscale PNG, one pixel per frame and bin."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(_to_pixels(mel)), mode="L").save(path, format="PNG")
    return path


def write_panel(mels: Sequence[MelSpectrogram], path, gutter: int = PANEL_GUTTER) -> Path:
    """Render several mel grids side by side, separated by white gutters."""
    if not mels:
        raise ValueError("A panel needs at least one mel-spectrogram")
    pieces = []
    for index, mel in enumerate(mels):
        pixels = _to_pixels(mel)
        if index and gutter:
            pieces.append(np.full((pixels.shape[0], gutter), 255, dtype=np.uint8))
        pieces.append(pixels)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(np.hstack(pieces)), mode="L").save(path, format="PNG")
    return path


def save_mel(mel: MelSpectrogram, path) -> Path:
    """
    Write a mel grid to the binary cache format.

    Missing normalization statistics are stored as NaN.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    norm_min = mel.norm_min if mel.norm_min is not None else float("nan")
    norm_max = mel.norm_max if mel.norm_max is not None else float("nan")
    frames, bins = mel.values.shape
    header = _HEADER.pack(MEL_MAGIC, MEL_VERSION, frames, bins, norm_min, norm_max)
    with path.open("wb") as handle:
        handle.write(header)
        handle.write(mel.values.astype("<f4").tobytes())
    return path


def load_mel(path, sample_rate: int = settings.SAMPLE_RATE, hop: int = settings.HOP_LENGTH) -> MelSpectrogram:
    """Read a grid written by :func:`save_mel`."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path} is too short to be a mel cache file")
    magic, version, frames, bins, norm_min, norm_max = _HEADER.unpack_from(raw)
    if magic != MEL_MAGIC:
        raise FormatError(f"{path} is not a mel cache file")
    if version != MEL_VERSION:
        raise VersionError(f"{path} has mel cache version {version}; expected {MEL_VERSION}")
    payload = raw[_HEADER.size:]
    if len(payload) != frames * bins * 4:
        raise FormatError(f"{path} payload holds {len(payload)} bytes; expected {frames * bins * 4}")
    values = np.frombuffer(payload, dtype="<f4").reshape(frames, bins)
    stats = (None, None) if np.isnan(norm_min) or np.isnan(norm_max) else (float(norm_min), float(norm_max))
    return MelSpectrogram(values.astype(np.float32), stats[0], stats[1], sample_rate, hop)
