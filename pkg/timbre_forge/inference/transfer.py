"""
Full-length timbre transfer: sliding-window translation, overlap averaging and vocoding.
"""

import logging
from pathlib import Path

import numpy as np
from attrs import field, frozen, validators

from .. import settings
from ..audio.clip import AudioClip, load_wav, write_wav
from ..audio.prep import PreprocessConfig, preprocess_clip
from ..exceptions import ShortAudio
from ..melspec.io import write_image
from ..melspec.transforms import MelSpectrogram, StftConfig, mel_spectrogram
from .vocoders import get_vocoder
from .windows import OVERLAP_MODES, plan_windows

logger = logging.getLogger(__name__)


@frozen
class InferenceConfig:
    """How a recording is translated and turned back into audio."""

    overlap: int = field(default=4, validator=validators.instance_of(int))
    overlap_mode: str = field(default="count", validator=validators.in_(OVERLAP_MODES))
    deterministic: bool = True
    seed: int = 0
    window_batch: int = field(default=8, validator=validators.ge(1))
    vocoder: str = "griffin-lim"
    vocoder_options: dict = field(factory=dict)
    iterations: int = field(default=settings.GRIFFIN_LIM_ITERS, validator=validators.ge(1))
    momentum: float = settings.GRIFFIN_LIM_MOMENTUM
    inversion: str = field(default="nnls", validator=validators.in_(("nnls", "pinv")))
    preprocess: PreprocessConfig = field(factory=PreprocessConfig)
    stft: StftConfig = field(factory=StftConfig)

    def build_vocoder(self):
        options = dict(self.vocoder_options)
        if self.vocoder == "griffin-lim":
            options = {"stft": self.stft, "iterations": self.iterations, "momentum": self.momentum,
                       "inversion": self.inversion, **options}
        return get_vocoder(self.vocoder, **options)


def transfer_full(
    mel: MelSpectrogram,
    source: str,
    target: str,
    bundle,
    deterministic: bool = True,
    *,
    overlap: int = 4,
    overlap_mode: str = "count",
    rng: np.random.Generator | None = None,
    window_batch: int = 8,
) -> MelSpectrogram:
    """
    Translate every 128-frame window of ``mel`` and average the overlapping outputs frame by frame.

    The result has the input's shape and normalization statistics.
    """
    plan = plan_windows(mel.frames, overlap, overlap_mode=overlap_mode)
    if not deterministic and rng is None:
        rng = np.random.default_rng(0)
    totals = np.zeros(mel.values.shape, dtype=np.float64)
    window = plan.window
    for first in range(0, len(plan.starts), window_batch):
        starts = plan.starts[first:first + window_batch]
        patches = np.stack([mel.values[start:start + window] for start in starts])[:, np.newaxis]
        translated = bundle.translate(patches, source, target, deterministic=deterministic, rng=rng)
        for start, patch in zip(starts, translated):
            totals[start:start + window] += patch[0]
    values = totals / plan.coverage()[:, np.newaxis]
    logger.debug("[Transfer] %s -> %s over %d windows (stride %d)", source, target, len(plan), plan.stride)
    return mel.with_values(np.clip(values, 0.0, 1.0).astype(np.float32))


@frozen
class TransferResult:
    """Outputs of end_to_end."""

    wav_path: Path
    clip: AudioClip
    input_mel: MelSpectrogram
    output_mel: MelSpectrogram
    images: tuple[Path, ...] = field(converter=tuple, factory=tuple)


def end_to_end(
    input_wav,
    source: str,
    target: str,
    bundle,
    cfg: InferenceConfig | None = None,
    out_wav=None,
    plot: bool = False,
) -> TransferResult:
    """
    Preprocess a recording, translate its mel grid, vocode it and write the result.

    With ``plot``, ``<out>.input.png`` and ``<out>.output.png`` are written
    next to the output WAV.
    """
    cfg = cfg or InferenceConfig()
    input_wav = Path(input_wav)
    out_wav = Path(out_wav) if out_wav is not None else input_wav.with_name(f"{input_wav.stem}_{target}.wav")
    clip = preprocess_clip(load_wav(input_wav), cfg.preprocess)
    if len(clip) < settings.EXCERPT_FRAMES * cfg.stft.hop:
        raise ShortAudio(
            f"{input_wav} lasts {clip.duration:.2f} s; timbre transfer needs at least "
            f"{settings.EXCERPT_FRAMES * cfg.stft.hop / cfg.stft.sample_rate:.2f} s",
            required=settings.EXCERPT_FRAMES * cfg.stft.hop, got=len(clip),
        )
    input_mel = mel_spectrogram(clip, cfg.stft)
    output_mel = transfer_full(
        input_mel, source, target, bundle, cfg.deterministic, overlap=cfg.overlap, overlap_mode=cfg.overlap_mode,
        rng=np.random.default_rng(cfg.seed), window_batch=cfg.window_batch,
    )
    audio = cfg.build_vocoder().vocode(output_mel)
    write_wav(audio, out_wav)
    images = []
    if plot:
        images.append(write_image(input_mel, out_wav.with_suffix(".input.png")))
        images.append(write_image(output_mel, out_wav.with_suffix(".output.png")))
    logger.info("[Transfer] %s (%s) -> %s (%s), %.2f s", input_wav, source, out_wav, target, audio.duration)
    return TransferResult(out_wav, audio, input_mel, output_mel, images)
