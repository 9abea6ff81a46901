"""
Model evaluation: reconstruction SSIM, cyclic SSIM and the Frechet audio distance per domain pair.
"""

import csv
import json
import logging
from pathlib import Path

import numpy as np
from attrs import asdict, field, frozen, validators

from .. import settings
from ..audio.clip import load_wav
from ..audio.manifest import SPLITS, DatasetManifest
from ..exceptions import ConfigError, InsufficientData
from ..inference.transfer import InferenceConfig, transfer_full
from ..keys import DomainPair
from ..trainer.sampling import DomainData, load_domain
from .embedders import EMBEDDERS, embed_clips, load_embeddings
from .frechet import fit_gaussian, frechet_distance
from .ssim import ssim

logger = logging.getLogger(__name__)

REPORT_JSON = "metrics.json"
REPORT_CSV = "metrics.csv"
METRICS = ("ssim_recon", "ssim_cyclic", "fad")


def _pairs(value):
    return None if value is None else tuple(str(DomainPair.from_string(str(pair))) for pair in value)


@frozen
class EvaluationConfig:
    """Which pairs and splits to evaluate and how to produce transferred audio."""

    pairs: tuple[str, ...] | None = field(default=None, converter=_pairs)
    split: str = field(default="test", validator=validators.in_(SPLITS))
    reference_split: str = field(default="train", validator=validators.in_(SPLITS))
    excerpt_stride: int = field(default=settings.EXCERPT_FRAMES, validator=validators.ge(1))
    window_batch: int = field(default=8, validator=validators.ge(1))
    embedder: str = field(default="spectral", validator=validators.in_(tuple(EMBEDDERS)))
    jobs: int = field(default=1, validator=validators.ge(1))
    fad: bool = True
    inference: InferenceConfig = field(factory=InferenceConfig)


@frozen
class PairMetrics:
    """Scores of one source -> target pair."""

    pair: str
    ssim_recon: float
    ssim_cyclic: float
    fad: float | None
    n_excerpts: int
    n_clips: int

    def as_dict(self) -> dict:
        values = asdict(self)
        values.pop("pair")
        return values


@frozen
class EvaluationReport:
    pairs: tuple[PairMetrics, ...] = field(converter=tuple)

    def rows(self) -> list[tuple[str, str, float | None]]:
        """Flat ``(pair, metric, value)`` rows: two SSIM variants and the FAD per pair."""
        return [(metrics.pair, name, getattr(metrics, name)) for metrics in self.pairs for name in METRICS]


def default_pairs(domains) -> list[str]:
    """The first two domains and, with four or more, also the last two."""
    domains = list(domains)
    pairs = [str(DomainPair(domains[0], domains[1]))]
    if len(domains) >= 4:
        pairs.append(str(DomainPair(domains[-2], domains[-1])))
    return pairs


def fixed_excerpts(data: DomainData, stride: int = settings.EXCERPT_FRAMES,
                   frames: int = settings.EXCERPT_FRAMES) -> np.ndarray:
    """Excerpts at frames 0, stride, 2*stride, ... of every recording, shaped N x 1 x frames x mel bins."""
    patches = [
        mel.values[start:start + frames]
        for mel in data.mels
        for start in range(0, mel.frames - frames + 1, stride)
    ]
    if not patches:
        raise InsufficientData(f"Domain '{data.name}' has no {frames}-frame excerpt to evaluate")
    return np.stack(patches)[:, np.newaxis]


def _batched_translate(bundle, patches, source, target, batch):
    return np.concatenate([
        bundle.translate(patches[i:i + batch], source, target, deterministic=True)
        for i in range(0, len(patches), batch)
    ])


def reconstruction_ssim(bundle, patches: np.ndarray, source: str, target: str, batch: int = 8) -> tuple[float, float]:
    """Mean SSIM of one-pass self-reconstruction and of source -> target -> source reconstruction."""
    recon = _batched_translate(bundle, patches, source, source, batch)
    translated = _batched_translate(bundle, patches, source, target, batch)
    cyclic = _batched_translate(bundle, translated, target, source, batch)
    ssim_recon = float(np.mean([ssim(x[0], y[0]) for x, y in zip(patches, recon)]))
    ssim_cyclic = float(np.mean([ssim(x[0], y[0]) for x, y in zip(patches, cyclic)]))
    return ssim_recon, ssim_cyclic


def transfer_fad(bundle, manifest: DatasetManifest, pair: DomainPair, cfg: EvaluationConfig,
                 source: DomainData) -> tuple[float | None, int]:
    """FAD between real target recordings and the source recordings transferred into the target."""
    inference = cfg.inference
    embedder = EMBEDDERS[cfg.embedder](inference.stft)
    vocoder = inference.build_vocoder()
    transferred = [
        vocoder.vocode(transfer_full(mel, pair.source, pair.target, bundle, overlap=inference.overlap,
                                     overlap_mode=inference.overlap_mode, window_batch=cfg.window_batch))
        for mel in source.mels if mel.frames >= settings.EXCERPT_FRAMES
    ]
    real = [load_wav(path) for path in manifest.files_for(pair.target, cfg.reference_split)]
    if len(transferred) < 2 or len(real) < 2:
        logger.warning(
            "[Evaluate] FAD for %s skipped: %d transferred and %d reference clips (2 of each needed)",
            pair, len(transferred), len(real),
        )
        return None, len(transferred)
    fake_stats = fit_gaussian(embed_clips(embedder, transferred, cfg.jobs))
    real_stats = fit_gaussian(embed_clips(embedder, real, cfg.jobs))
    return frechet_distance(real_stats, fake_stats), len(transferred)


def evaluate_model(bundle, manifest: DatasetManifest, cfg: EvaluationConfig | None = None) -> EvaluationReport:
    """Score every requested pair on the evaluation split."""
    cfg = cfg or EvaluationConfig()
    pairs = [DomainPair.from_string(pair) for pair in (cfg.pairs or default_pairs(bundle.domains))]
    for pair in pairs:
        missing = [name for name in (pair.source, pair.target) if name not in bundle.domains]
        if missing:
            raise ConfigError("Pair names domains the model does not have", {"pairs": f"{pair}: {missing}"})

    results = []
    for pair in pairs:
        source = load_domain(manifest, pair.source, cfg.split, cfg.inference.stft)
        patches = fixed_excerpts(source, cfg.excerpt_stride)
        ssim_recon, ssim_cyclic = reconstruction_ssim(bundle, patches, pair.source, pair.target, cfg.window_batch)
        if ssim_recon < ssim_cyclic:
            logger.warning(
                "[Evaluate] %s: cyclic SSIM %.4f exceeds one-pass SSIM %.4f", pair, ssim_cyclic, ssim_recon
            )
        fad, n_clips = transfer_fad(bundle, manifest, pair, cfg, source) if cfg.fad else (None, 0)
        metrics = PairMetrics(str(pair), ssim_recon, ssim_cyclic, fad, len(patches), n_clips)
        logger.info("[Evaluate] %s: %s", pair, metrics.as_dict())
        results.append(metrics)
    return EvaluationReport(results)


def fad_from_files(real_path, fake_path) -> float:
    """FAD between two embedding CSV files."""
    return frechet_distance(fit_gaussian(load_embeddings(real_path)), fit_gaussian(load_embeddings(fake_path)))


def write_report(report: EvaluationReport, out_dir) -> tuple[Path, Path]:
    """Write ``metrics.json`` (one object per pair) and its flat CSV mirror ``metrics.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / REPORT_JSON
    payload = {"pairs": {metrics.pair: metrics.as_dict() for metrics in report.pairs}}
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf8")
    csv_path = out_dir / REPORT_CSV
    with csv_path.open("w", newline="", encoding="utf8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["pair", "metric", "value"])
        for pair, name, value in report.rows():
            writer.writerow([pair, name, "" if value is None else repr(value)])
    return json_path, csv_path
