"""
Command-line entry point: ``timbre-forge <subcommand>``.

Exit codes: 0 on success, 1 for usage errors, 2 when the pipeline fails.
"""

import functools
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import attrs
import click

from . import __version__, settings
from .audio import (
    PreprocessConfig,
    load_manifest,
    load_wav,
    preprocess_clip,
    save_manifest,
    split_dataset,
    write_wav,
)
from .exceptions import ConfigError, InsufficientData, ShortAudio, TimbreForgeError
from .inference import InferenceConfig, available_vocoders, end_to_end
from .inference.windows import OVERLAP_MODES
from .melspec import load_mel, mel_spectrogram, save_mel, write_image, write_panel
from .metrics import EvaluationConfig, evaluate_model, fad_from_files, write_report
from .trainer import Trainer, load_config, load_model, validate_config
from .trainer.sampling import MEL_CACHE_SUFFIX, load_recording_mel, mel_cache_path

logger = logging.getLogger(__name__)

USAGE_ERROR = 1
RUNTIME_ERROR = 2

DEFAULT_RUN_DIR = Path("run")

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class PipelineFailure(click.ClickException):
    """A TimbreForgeError or OSError surfaced to the command line."""

    exit_code = RUNTIME_ERROR


def _reports_errors(command):
    """Turn expected pipeline failures into a one-line message and exit code 2."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConfigError as err:
            lines = [str(err)] if not err.errors else ["Invalid configuration:"]
            lines += [f"  {name}: {message}" for name, message in sorted(err.errors.items())]
            raise PipelineFailure("\n".join(lines)) from err
        except (TimbreForgeError, OSError) as err:
            logger.debug("[CLI] %s failed", command.__name__, exc_info=True)
            raise PipelineFailure(f"{type(err).__name__}: {err}") from err

    return wrapper


def _resolve_seed(seed: int | None) -> int:
    return 0 if seed is None else seed


seed_option = click.option(
    "--seed", type=int, envvar=settings.SEED_ENV_VAR, show_envvar=True, default=None,
    help="Seed for every random choice of the command.",
)
jobs_option = click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
                           help="Worker threads.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="timbre-forge")
@click.option("--verbose", "-v", is_flag=True, help="Log debug messages.")
def cli(verbose):
    """Mel-spectrogram timbre transfer: preprocess, train, infer, evaluate and plot."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, stream=sys.stderr)


# =========================================================================
# preprocess
# =========================================================================


def _raw_tree(raw_dir: Path) -> dict[str, list[Path]]:
    """``{domain: [wav paths]}`` for a directory holding one sub-directory of WAV files per domain."""
    tree = {}
    for domain_dir in sorted(p for p in raw_dir.iterdir() if p.is_dir()):
        wavs = sorted(p for p in domain_dir.iterdir() if p.suffix.lower() == ".wav")
        if wavs:
            tree[domain_dir.name] = wavs
    if not tree:
        raise InsufficientData(f"No domain directories with WAV files under {raw_dir}")
    return tree


def _prepare_file(source: Path, target: Path, cfg: PreprocessConfig) -> Path:
    clip = preprocess_clip(load_wav(source), cfg)
    write_wav(clip, target)
    save_mel(mel_spectrogram(clip), mel_cache_path(target))
    logger.debug("[Preprocess] %s -> %s", source, target)
    return target


@cli.command()
@click.option("--in", "raw_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory with one sub-directory of WAV files per domain.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path),
              help="Where preprocessed WAVs and mel caches are written.")
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Manifest path [default: <out>/manifest.json].")
@click.option("--target-db", type=float, default=settings.TARGET_DB, show_default=True,
              help="RMS level quiet clips are raised to (dBFS).")
@click.option("--threshold-db", type=float, default=settings.SILENCE_THRESHOLD_DB, show_default=True,
              help="Silence gate (dBFS).")
@click.option("--min-gap-ms", type=float, default=settings.SILENCE_MIN_GAP_MS, show_default=True,
              help="Shortest silence that gets zeroed.")
@seed_option
@jobs_option
@_reports_errors
def preprocess(raw_dir, out_dir, manifest_path, target_db, threshold_db, min_gap_ms, seed, jobs):
    """Resample, level and silence-mask raw recordings, cache their mels and split them into a manifest."""
    cfg = PreprocessConfig(target_db=target_db, threshold_db=threshold_db, min_gap_ms=min_gap_ms)
    tree = _raw_tree(raw_dir)
    work = [
        (source, out_dir / domain / f"{source.stem}.wav")
        for domain, sources in tree.items()
        for source in sources
    ]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        written = list(pool.map(lambda item: _prepare_file(*item, cfg), work))
    files = {domain: [str(path) for path in written if path.parent.name == domain] for domain in tree}
    manifest_path = manifest_path or out_dir / "manifest.json"
    save_manifest(split_dataset(files, _resolve_seed(seed)), manifest_path)
    logger.info("[Preprocess] %d files in %d domains; manifest at %s", len(written), len(tree), manifest_path)
    click.echo(str(manifest_path))


# =========================================================================
# train
# =========================================================================


def _manifest_for(config_path: Path | None, manifest_path: Path | None, config_manifest: str | None):
    if manifest_path is not None:
        return load_manifest(manifest_path)
    if config_manifest and config_path is not None:
        return load_manifest(config_path.parent / config_manifest)
    raise ConfigError("No manifest to train on", {"manifest": "pass --manifest or set it in the config"})


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Training config JSON.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Run directory for the loss CSV and checkpoints [default: run/, or the directory of --resume].")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Manifest [default: the config's manifest key].")
@click.option("--resume", "resume_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="Checkpoint to continue from.")
@click.option("--epochs", "max_epochs", type=click.IntRange(min=1), default=None,
              help="Stop after this many epochs in total.")
@seed_option
@_reports_errors
def train(config_path, out_dir, manifest_path, resume_path, max_epochs, seed):
    """Train a model, writing losses.csv and checkpoints into --out."""
    if resume_path is not None:
        config = load_config(config_path) if config_path is not None else None
        manifest = _manifest_for(config_path, manifest_path, config.manifest if config else None)
        trainer = Trainer.resume(resume_path, manifest, out_dir or resume_path.parent)
    else:
        if config_path is None:
            raise click.UsageError("--config is required unless --resume is given")
        config = load_config(config_path)
        if seed is not None:
            config = attrs.evolve(config, seed=seed)
        manifest = _manifest_for(config_path, manifest_path, config.manifest)
        trainer = Trainer(config, manifest, out_dir or DEFAULT_RUN_DIR)
    result = trainer.run(max_epochs=max_epochs)
    for checkpoint in result.checkpoints:
        click.echo(str(checkpoint))


# =========================================================================
# infer
# =========================================================================


@cli.command()
@click.option("--ckpt", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Model checkpoint.")
@click.option("--in", "input_wav", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Recording to translate.")
@click.option("--source", required=True, help="Domain of the input recording.")
@click.option("--target", required=True, help="Domain to translate into.")
@click.option("--out", "out_wav", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Output WAV.")
@click.option("--plot", is_flag=True, help="Also write <out>.input.png and <out>.output.png.")
@click.option("--overlap", type=click.IntRange(min=0), default=4, show_default=True,
              help="Window overlap (a count or a number of frames, see --overlap-mode).")
@click.option("--overlap-mode", type=click.Choice(OVERLAP_MODES), default="count", show_default=True)
@click.option("--iterations", type=click.IntRange(min=1), default=settings.GRIFFIN_LIM_ITERS, show_default=True,
              help="Griffin-Lim iterations.")
@click.option("--vocoder", default="griffin-lim", show_default=True,
              help=f"Registered vocoder name or 'module:attr' (built in: {', '.join(available_vocoders())}).")
@click.option("--stochastic", is_flag=True, help="Sample the latent code instead of using its mean.")
@seed_option
@_reports_errors
def infer(checkpoint_path, input_wav, source, target, out_wav, plot, overlap, overlap_mode, iterations, vocoder,
          stochastic, seed):  # pylint: disable=too-many-arguments
    """Translate a recording from one domain into another."""
    cfg = InferenceConfig(
        overlap=overlap, overlap_mode=overlap_mode, iterations=iterations, vocoder=vocoder,
        deterministic=not stochastic, seed=_resolve_seed(seed),
    )
    result = end_to_end(input_wav, source, target, load_model(checkpoint_path), cfg, out_wav, plot=plot)
    for path in (result.wav_path, *result.images):
        click.echo(str(path))


# =========================================================================
# evaluate
# =========================================================================


@cli.command()
@click.option("--ckpt", "checkpoint_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Model checkpoint to score.")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Dataset manifest.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory for metrics.json and metrics.csv.")
@click.option("--pair", "pairs", multiple=True, help="Direction to score, e.g. violin+trumpet. Repeatable.")
@click.option("--split", default="test", show_default=True, type=click.Choice(("train", "valid", "test")))
@click.option("--reference-split", default="train", show_default=True, type=click.Choice(("train", "valid", "test")),
              help="Split whose target-domain audio is the real set for FAD.")
@click.option("--no-fad", is_flag=True, help="Only compute SSIM.")
@click.option("--iterations", type=click.IntRange(min=1), default=settings.GRIFFIN_LIM_ITERS, show_default=True,
              help="Griffin-Lim iterations for transferred audio.")
@click.option("--real", "real_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="Embedding CSV of real audio (with --fake: only compute FAD).")
@click.option("--fake", "fake_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="Embedding CSV of generated audio.")
@seed_option
@jobs_option
@_reports_errors
def evaluate(checkpoint_path, manifest_path, out_dir, pairs, split, reference_split, no_fad, iterations, real_path,
             fake_path, seed, jobs):  # pylint: disable=too-many-arguments
    """Score reconstructions (SSIM) and transfers (FAD), or compute FAD between two embedding files."""
    if real_path is not None or fake_path is not None:
        if real_path is None or fake_path is None:
            raise click.UsageError("--real and --fake go together")
        click.echo(f"fad {fad_from_files(real_path, fake_path)!r}")
        return
    if checkpoint_path is None or manifest_path is None or out_dir is None:
        raise click.UsageError("--ckpt, --manifest and --out are required unless --real/--fake are given")
    cfg = EvaluationConfig(
        pairs=pairs or None, split=split, reference_split=reference_split, jobs=jobs, fad=not no_fad,
        inference=InferenceConfig(iterations=iterations, seed=_resolve_seed(seed)),
    )
    report = evaluate_model(load_model(checkpoint_path), load_manifest(manifest_path), cfg)
    json_path, csv_path = write_report(report, out_dir)
    for pair, name, value in report.rows():
        click.echo(f"{pair} {name} {'n/a' if value is None else f'{value:.4f}'}")
    logger.info("[Evaluate] Report written to %s and %s", json_path, csv_path)


# =========================================================================
# plot
# =========================================================================


def _panel_mels(manifest_path: Path, split: str):
    """The first excerpt of each domain's first recording in ``split``."""
    manifest = load_manifest(manifest_path)
    mels = []
    for name in manifest.domain_names:
        files = manifest.files_for(name, split)
        if not files:
            raise InsufficientData(f"Domain '{name}' has no {split} files")
        mel = load_recording_mel(files[0])
        if mel.frames < settings.EXCERPT_FRAMES:
            raise ShortAudio(f"{files[0]} has {mel.frames} frames; a panel needs {settings.EXCERPT_FRAMES}",
                             required=settings.EXCERPT_FRAMES, got=mel.frames)
        mels.append(mel.with_values(mel.values[:settings.EXCERPT_FRAMES]))
    return mels


@cli.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_png", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="PNG path [default: the input with a .png suffix].")
@click.option("--split", default="train", show_default=True, type=click.Choice(("train", "valid", "test")),
              help="Split the panel excerpts come from (manifest input only).")
@_reports_errors
def plot(source, out_png, split):
    """Render a WAV, a .mels cache or a manifest panel as a grayscale PNG."""
    out_png = out_png or source.with_suffix(".png")
    suffix = source.suffix.lower()
    if suffix == ".json":
        path = write_panel(_panel_mels(source, split), out_png)
    elif suffix == MEL_CACHE_SUFFIX:
        path = write_image(load_mel(source), out_png)
    elif suffix == ".wav":
        clip = preprocess_clip(load_wav(source), PreprocessConfig())
        path = write_image(mel_spectrogram(clip), out_png)
    else:
        raise click.UsageError(f"Cannot plot {source}: expected .wav, {MEL_CACHE_SUFFIX} or a .json manifest")
    click.echo(str(path))


# =========================================================================
# validate-config
# =========================================================================


@cli.command("validate-config")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Check the config's domains against this manifest.")
@_reports_errors
def validate_config_command(config_path, manifest_path):
    """Check a training config and print it with every default filled in."""
    manifest = load_manifest(manifest_path) if manifest_path is not None else None
    config = validate_config(config_path, manifest)
    click.echo(json.dumps(config.to_dict(), indent=2, sort_keys=True))


def run(argv=None) -> int:
    """
    Run the CLI on ``argv`` and return its exit code instead of exiting.
    """
    try:
        result = cli.main(args=argv, prog_name="timbre-forge", standalone_mode=False)
    except click.UsageError as err:
        err.show()
        return USAGE_ERROR
    except click.ClickException as err:
        err.show()
        return err.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return USAGE_ERROR
    return result if isinstance(result, int) else 0


def main():
    sys.exit(run())
