"""
The epoch loop: batch sampling, pair scheduling, learning-rate decay, loss CSV and checkpoints.
"""

import itertools
import logging
from pathlib import Path

import numpy as np
from attrs import field, frozen

from ..audio.manifest import DatasetManifest
from ..exceptions import ConfigError
from ..keys import DomainPair
from ..losses import LossCsvWriter, LossReport
from ..melspec.transforms import StftConfig
from ..model.bundle import ModelBundle, build_model
from ..nn.optim import lr_schedule
from .checkpoint import checkpoint_name, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .sampling import DomainData, load_domain, sample_batch
from .step import Optimizers, make_optimizers, train_pair_step

logger = logging.getLogger(__name__)

LOSS_CSV_NAME = "losses.csv"


@frozen
class TrainResult:
    """What a call to ``Trainer.run`` produced."""

    out_dir: Path
    loss_csv: Path
    checkpoints: tuple[Path, ...] = field(converter=tuple)
    epochs_completed: int
    steps: int
    last_reports: dict[str, LossReport] = field(factory=dict)


def training_pairs(domains, topology: str) -> list[DomainPair]:
    """The pair iterated by one_to_one, or every unordered pair for many_to_many (in domain order)."""
    domains = list(domains)
    if topology == "one_to_one":
        return [DomainPair(domains[0], domains[1])]
    return [DomainPair(a, b) for a, b in itertools.combinations(domains, 2)]


class Trainer:
    """
    Owns the bundle, the optimizers and the sampler RNG for one training run.

    The RNG drives both excerpt sampling and reparameterization noise, so a
    run is fully determined by the config seed and the data.
    """

    def __init__(
        self,
        cfg: TrainConfig,
        manifest: DatasetManifest,
        out_dir,
        *,
        stft: StftConfig | None = None,
        bundle: ModelBundle | None = None,
        optimizers: Optimizers | None = None,
    ):
        missing = [name for name in cfg.domains if name not in manifest.domain_names]
        if missing:
            raise ConfigError("Domains missing from the manifest", {"domains": ", ".join(missing)})
        self.cfg = cfg
        self.manifest = manifest
        self.out_dir = Path(out_dir)
        self.rng = np.random.default_rng(cfg.seed)
        self.bundle = bundle if bundle is not None else build_model(cfg.domains, cfg.variant, cfg.seed)
        self.optimizers = optimizers if optimizers is not None else make_optimizers(self.bundle, cfg.optimizer)
        self.epoch = 0
        self.step = 0
        self.pairs = training_pairs(cfg.domains, cfg.variant.topology)
        self.data: dict[str, DomainData] = {
            name: load_domain(manifest, name, "train", stft, cfg.norm_scope) for name in cfg.domains
        }
        self.steps_per_epoch = cfg.resolved_steps_per_epoch({name: len(data) for name, data in self.data.items()})

    @classmethod
    def resume(cls, checkpoint_path, manifest: DatasetManifest, out_dir, *, stft: StftConfig | None = None):
        """Continue a run from a checkpoint written by ``run``; the loss CSV is appended to."""
        checkpoint = load_checkpoint(checkpoint_path)
        if checkpoint.config is None or checkpoint.optimizers is None or checkpoint.rng_state is None:
            raise ConfigError("Checkpoint cannot be resumed", {"checkpoint": "written without training state"})
        trainer = cls(
            checkpoint.config, manifest, out_dir, stft=stft, bundle=checkpoint.bundle,
            optimizers=checkpoint.optimizers,
        )
        trainer.rng.bit_generator.state = checkpoint.rng_state
        trainer.epoch = checkpoint.epoch
        trainer.step = checkpoint.step
        logger.info("[Trainer] Resuming from %s at epoch %d, step %d", checkpoint_path, trainer.epoch, trainer.step)
        return trainer

    @property
    def loss_csv(self) -> Path:
        return self.out_dir / LOSS_CSV_NAME

    def _checkpoint(self, name: str) -> Path:
        return save_checkpoint(
            self.out_dir / name, self.bundle, self.optimizers, config=self.cfg, epoch=self.epoch, step=self.step,
            rng=self.rng,
        )

    def run_step(self, writer: LossCsvWriter | None = None) -> dict[str, LossReport]:
        """One step: a batch per domain, then one update per training pair."""
        batches = {name: sample_batch(self.data[name], self.rng, self.cfg.batch_size) for name in self.cfg.domains}
        self.step += 1
        reports = {}
        for pair in self.pairs:
            extra = ()
            if self.cfg.latent_scope == "all":
                extra = [batches[name] for name in self.cfg.domains if name not in (pair.source, pair.target)]
            report = train_pair_step(
                self.bundle, batches[pair.source], batches[pair.target], self.cfg, self.optimizers, self.rng, extra,
            )
            reports[str(pair)] = report
            if writer is not None:
                writer.write(self.step, self.epoch, str(pair), self.optimizers.lr, report)
        return reports

    def run(self, max_epochs: int | None = None) -> TrainResult:
        """
        Train until ``cfg.epochs`` epochs are complete.

        ``max_epochs`` stops earlier, after that many more epochs; no final
        checkpoint is written then.
        """
        target = self.cfg.epochs if max_epochs is None else min(self.cfg.epochs, self.epoch + max_epochs)
        checkpoints = []
        reports: dict[str, LossReport] = {}
        logger.info(
            "[Trainer] Training %s (%s) for epochs %d..%d, %d steps per epoch, pairs: %s",
            ", ".join(self.cfg.domains), self.cfg.variant.topology, self.epoch + 1, target, self.steps_per_epoch,
            ", ".join(str(pair) for pair in self.pairs),
        )
        with LossCsvWriter(self.loss_csv, append=self.step > 0) as writer:
            while self.epoch < target:
                self.optimizers.lr = lr_schedule(self.epoch, self.cfg.epochs, self.cfg.optimizer.lr)
                for _ in range(self.steps_per_epoch):
                    reports = self.run_step(writer)
                self.epoch += 1
                logger.info(
                    "[Trainer] Epoch %d/%d done (lr %.3g): %s", self.epoch, self.cfg.epochs, self.optimizers.lr,
                    ", ".join(f"{pair} total_g={report.total_g:.4f}" for pair, report in reports.items()),
                )
                if self.epoch % self.cfg.checkpoint_every == 0:
                    checkpoints.append(self._checkpoint(checkpoint_name(self.epoch)))
        if self.epoch >= self.cfg.epochs:
            checkpoints.append(self._checkpoint(checkpoint_name()))
        return TrainResult(self.out_dir, self.loss_csv, checkpoints, self.epoch, self.step, reports)


def train(cfg: TrainConfig, manifest: DatasetManifest, out_dir, *, stft: StftConfig | None = None) -> TrainResult:
    """Run a fresh training job and return where its outputs went."""
    return Trainer(cfg, manifest, out_dir, stft=stft).run()
