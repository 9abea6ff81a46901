"""
Audio embedders for the Frechet audio distance, and embedding files.

An embedder maps a clip to a fixed-length vector. The built-in spectral
embedder pools a log-mel grid over time; externally computed embeddings
(for example from a pretrained audio network) can be imported from CSV.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Protocol

import numpy as np

from .. import settings
from ..audio.clip import AudioClip
from ..exceptions import FormatError, ShortAudio
from ..melspec.transforms import StftConfig, log_mel

logger = logging.getLogger(__name__)


class Embedder(Protocol):
    name: str
    dimension: int

    def embed(self, clip: AudioClip) -> np.ndarray:
        ...


class SpectralEmbedder:
    """
    64 values per clip: the time mean and time standard deviation of 32 pooled log-mel bands.

    Each pooled band averages four adjacent mel bands.
    """

    name = "spectral"
    bands = 32

    def __init__(self, stft: StftConfig | None = None):
        self.stft = stft or StftConfig()
        if self.stft.n_mels % self.bands:
            raise ValueError(f"n_mels ({self.stft.n_mels}) must be a multiple of {self.bands}")

    @property
    def dimension(self) -> int:
        return 2 * self.bands

    def _pooled_bands(self, samples: np.ndarray, sample_rate: int) -> np.ndarray:
        grid = log_mel(AudioClip(samples, sample_rate), self.stft)
        return grid.reshape(grid.shape[0], self.bands, -1).mean(axis=2)

    def embed(self, clip: AudioClip) -> np.ndarray:
        """
        Pool the frames of the clip played forwards and backwards.

        The STFT frame grid is anchored at the first sample, so a reversed clip
        is framed differently. Pooling both directions gives every clip and
        its reversal the same frame set; the two halves are summed separately
        and then added, which makes the result exactly order-independent.
        """
        if len(clip) < self.stft.hop:
            raise ShortAudio(f"Clip of {len(clip)} samples is shorter than one frame", self.stft.hop, len(clip))
        forward = self._pooled_bands(clip.samples, clip.sample_rate)
        backward = self._pooled_bands(clip.samples[::-1], clip.sample_rate)
        count = forward.shape[0] + backward.shape[0]
        mean = (forward.sum(axis=0) + backward.sum(axis=0)) / count
        spread = ((forward - mean) ** 2).sum(axis=0) + ((backward - mean) ** 2).sum(axis=0)
        return np.concatenate([mean, np.sqrt(spread / count)])


def spectral_embedder(stft: StftConfig | None = None) -> SpectralEmbedder:
    return SpectralEmbedder(stft)


def embed_clips(embedder: Embedder, clips, jobs: int = 1) -> list[np.ndarray]:
    """Embed clips in order, on up to ``jobs`` threads."""
    clips = list(clips)
    if jobs <= 1 or len(clips) < 2:
        return [embedder.embed(clip) for clip in clips]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(embedder.embed, clips))


def save_embeddings(vectors, path) -> Path:
    """Write one embedding per row as decimal CSV without a header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for vector in vectors:
            writer.writerow([repr(float(value)) for value in np.ravel(vector)])
    return path


def load_embeddings(path) -> list[np.ndarray]:
    """Read an embedding CSV; every row must have the same number of values."""
    path = Path(path)
    vectors = []
    with path.open(newline="", encoding="utf8") as handle:
        for line_number, row in enumerate(csv.reader(handle), start=1):
            if not row:
                continue
            try:
                vector = np.array([float(value) for value in row], dtype=np.float64)
            except ValueError as err:
                raise FormatError(f"{path}:{line_number}: {err}") from err
            if vectors and vector.shape != vectors[0].shape:
                raise FormatError(
                    f"{path}:{line_number}: row has {vector.size} values, expected {vectors[0].size}"
                )
            vectors.append(vector)
    logger.debug("[Embeddings] Read %d vectors from %s", len(vectors), path)
    return vectors


EMBEDDERS = {"spectral": spectral_embedder}
