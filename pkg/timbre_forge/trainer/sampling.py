"""
Per-domain mel data and random excerpt batches.
"""

import logging
from pathlib import Path

import numpy as np
from attrs import field, frozen

from .. import settings
from ..audio.clip import load_wav
from ..audio.manifest import DatasetManifest
from ..exceptions import InsufficientData
from ..melspec.io import load_mel
from ..melspec.transforms import (
    MelSpectrogram,
    StftConfig,
    denormalize,
    mel_spectrogram,
    normalize_with,
)

logger = logging.getLogger(__name__)

MEL_CACHE_SUFFIX = ".mels"


def mel_cache_path(wav_path) -> Path:
    """Where the mel cache of a recording lives: next to the WAV with a ``.mels`` suffix."""
    return Path(wav_path).with_suffix(MEL_CACHE_SUFFIX)


def load_recording_mel(wav_path, cfg: StftConfig | None = None) -> MelSpectrogram:
    """Read a recording's cached mel grid, computing it from the (preprocessed) WAV on a miss."""
    cache = mel_cache_path(wav_path)
    if cache.exists():
        return load_mel(cache)
    logger.debug("[Sampling] No mel cache for %s; computing it", wav_path)
    return mel_spectrogram(load_wav(wav_path), cfg)


def renormalize(mels: list[MelSpectrogram]) -> list[MelSpectrogram]:
    """Re-normalize a set of grids with their joint extrema."""
    norm_min = min(mel.norm_min for mel in mels)
    norm_max = max(mel.norm_max for mel in mels)
    return [
        MelSpectrogram(
            normalize_with(denormalize(mel), norm_min, norm_max), norm_min, norm_max, mel.sample_rate, mel.hop
        )
        for mel in mels
    ]


@frozen(eq=False)
class DomainData:
    """The mel grids of one domain's recordings in one split."""

    name: str
    ids: tuple[str, ...] = field(converter=tuple)
    mels: tuple[MelSpectrogram, ...] = field(converter=tuple)

    def __len__(self):
        return len(self.mels)


def load_domain(
    manifest: DatasetManifest,
    domain: str,
    split: str = "train",
    cfg: StftConfig | None = None,
    norm_scope: str = "sample",
) -> DomainData:
    """Load every recording of ``domain`` in ``split``; ``norm_scope="domain"`` shares one set of extrema."""
    paths = manifest.files_for(domain, split)
    mels = [load_recording_mel(path, cfg) for path in paths]
    if norm_scope == "domain" and mels:
        mels = renormalize(mels)
    logger.info("[Sampling] Loaded %d %s recordings for %s", len(mels), split, domain)
    return DomainData(domain, [Path(path).name for path in paths], mels)


@frozen(eq=False)
class ExcerptBatch:
    """``batch_size`` random 128-frame excerpts of one domain, shaped batch x 1 x 128 x 128."""

    domain: str
    patches: np.ndarray
    sources: tuple[str, ...] = field(converter=tuple)
    starts: tuple[int, ...] = field(converter=tuple)


def sample_batch(data: DomainData, rng: np.random.Generator, batch_size: int = 4,
                 frames: int = settings.EXCERPT_FRAMES) -> ExcerptBatch:
    """
    Draw excerpts: a recording uniformly at random, then a start frame uniformly in ``[0, len - frames]``.

    Recordings shorter than ``frames`` are never chosen.
    """
    eligible = [index for index, mel in enumerate(data.mels) if mel.frames >= frames]
    if not eligible:
        raise InsufficientData(f"Domain '{data.name}' has no recording of at least {frames} frames")
    patches = np.empty((batch_size, 1, frames, settings.N_MELS), dtype=np.float32)
    sources, starts = [], []
    for slot in range(batch_size):
        index = eligible[int(rng.integers(len(eligible)))]
        mel = data.mels[index]
        start = int(rng.integers(mel.frames - frames + 1))
        patches[slot, 0] = mel.values[start:start + frames]
        sources.append(data.ids[index])
        starts.append(start)
    return ExcerptBatch(data.name, patches, sources, starts)
