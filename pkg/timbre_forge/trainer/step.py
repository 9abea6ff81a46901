"""
One training step for a pair of domains.

The forward graph runs both directions (A->B and B->A): self-reconstruction,
translation, re-encoding and cyclic reconstruction, plus the discriminator
scores. The generator side is back-propagated first; discriminator gradients
are then reset and recomputed from the discriminator loss alone, using the
fake scores as detached inputs. Adam then steps each side.
"""

import logging

import numpy as np
from attrs import define

from ..exceptions import ConfigError, NonFiniteLoss
from ..losses import (
    LossReport,
    adversarial_loss_d,
    adversarial_loss_d_grad,
    adversarial_loss_g,
    adversarial_loss_g_grad,
    cyclic_loss_grad_mu,
    kl_loss,
    kl_loss_grad,
    latent_loss_grad,
    mean_pair_distance,
    recon_l1,
    recon_l1_grad,
    total_objective,
)
from ..model.bundle import ModelBundle, reparameterize
from ..nn.optim import Adam, OptimizerConfig
from .config import TrainConfig
from .sampling import ExcerptBatch

logger = logging.getLogger(__name__)


@define
class Optimizers:
    """Adam for the generator side (encoder, shared block, decoders) and for the discriminators."""

    generator: Adam
    discriminator: Adam

    @property
    def lr(self) -> float:
        return self.generator.lr

    @lr.setter
    def lr(self, value: float):
        self.generator.lr = value
        self.discriminator.lr = value


def make_optimizers(bundle: ModelBundle, config: OptimizerConfig | None = None) -> Optimizers:
    named = list(bundle.named_parameters())
    return Optimizers(
        generator=Adam([(n, p) for n, p in named if not n.startswith("discriminators.")], config),
        discriminator=Adam([(n, p) for n, p in named if n.startswith("discriminators.")], config),
    )


@define
class _Path:
    """Tensors and tapes of one direction (source -> target -> source)."""

    x: np.ndarray
    mu: np.ndarray
    encode_tape: list
    recon_domain: str
    recon: np.ndarray
    recon_tape: tuple
    translated: np.ndarray
    translate_tape: tuple
    mu_cc: np.ndarray
    encode_cc_tape: list
    cycled: np.ndarray
    cycle_tape: tuple
    fake_scores: np.ndarray
    fake_tape: list
    real_scores: np.ndarray
    real_tape: list


class PairStep:
    """The forward graph and both backward passes for one pair of batches."""

    def __init__(self, bundle: ModelBundle, batch_a: ExcerptBatch, batch_b: ExcerptBatch, cfg: TrainConfig,
                 rng: np.random.Generator, extra_batches=()):
        if batch_a.domain == batch_b.domain:
            raise ConfigError("A pair step needs two different domains", {"pair": batch_a.domain})
        self.bundle = bundle
        self.batch_a = batch_a
        self.batch_b = batch_b
        self.cfg = cfg
        self.rng = rng
        self.extra_batches = list(extra_batches)
        self.paths: dict[str, _Path] = {}
        self.extras: list[tuple[np.ndarray, list]] = []
        self.report: LossReport | None = None

    @property
    def domains(self) -> tuple[str, str]:
        return self.batch_a.domain, self.batch_b.domain

    def forward(self) -> LossReport:
        bundle, a, b = self.bundle, *self.domains
        x = {a: self.batch_a.patches, b: self.batch_b.patches}
        other = {a: b, b: a}
        encoded = {name: bundle.encode(x[name]) for name in (a, b)}
        codes = {name: reparameterize(encoded[name][0], self.rng) for name in (a, b)}

        for source in (a, b):
            target = other[source]
            mu, encode_tape = encoded[source]
            recon_domain = source if self.cfg.vae_recon_path == "self" else target
            recon, recon_tape = bundle.decode(codes[source], recon_domain)
            translated, translate_tape = bundle.decode(codes[source], target)
            mu_cc, encode_cc_tape = bundle.encode(translated)
            cycled, cycle_tape = bundle.decode(reparameterize(mu_cc, self.rng), source)
            fake_scores, fake_tape = bundle.discriminate(translated, target)
            real_scores, real_tape = bundle.discriminate(x[source], source)
            self.paths[source] = _Path(
                x[source], mu, encode_tape, recon_domain, recon, recon_tape, translated, translate_tape,
                mu_cc, encode_cc_tape, cycled, cycle_tape, fake_scores, fake_tape, real_scores, real_tape,
            )
        self.extras = [bundle.encode(batch.patches) for batch in self.extra_batches]

        pa, pb = self.paths[a], self.paths[b]
        try:
            self.report = total_objective(
                gan_g=adversarial_loss_g(pa.fake_scores) + adversarial_loss_g(pb.fake_scores),
                # discriminator of a judges real a against b translated into a
                gan_d=adversarial_loss_d(pa.real_scores, pb.fake_scores)
                + adversarial_loss_d(pb.real_scores, pa.fake_scores),
                kl=kl_loss(pa.mu) + kl_loss(pb.mu),
                recon=recon_l1(pa.x, pa.recon) + recon_l1(pb.x, pb.recon),
                cc_kl=kl_loss(pa.mu_cc) + kl_loss(pb.mu_cc),
                cc_recon=recon_l1(pa.x, pa.cycled) + recon_l1(pb.x, pb.cycled),
                latent=mean_pair_distance(self._latent_means()),
                weights=self.cfg.weights,
                include_kld=self.cfg.variant.cyclic_kld,
            )
        except NonFiniteLoss as err:
            logger.error("[Trainer] Non-finite %s for %s+%s: %s", err.term, a, b, err.report)
            raise
        return self.report

    def _latent_means(self) -> list[np.ndarray]:
        a, b = self.domains
        return [self.paths[a].mu, self.paths[b].mu] + [mu for mu, _ in self.extras]

    def backward_generator(self):
        """Back-propagate the generator objective into encoder, shared block and decoders."""
        bundle, weights, a, b = self.bundle, self.cfg.weights, *self.domains
        other = {a: b, b: a}
        latent_grads = latent_loss_grad(self._latent_means(), weights)
        for index, source in enumerate((a, b)):
            path = self.paths[source]
            target = other[source]
            dtranslated = bundle.discriminate_backward(
                weights.lambda0 * adversarial_loss_g_grad(path.fake_scores), target, path.fake_tape
            )
            dcycled = weights.lambda4 * recon_l1_grad(path.x, path.cycled)
            dmu_cc = bundle.decode_backward(dcycled, source, path.cycle_tape)
            dmu_cc = dmu_cc + cyclic_loss_grad_mu(path.mu_cc, weights, self.cfg.variant.cyclic_kld)
            dtranslated = dtranslated + bundle.encode_backward(dmu_cc, path.encode_cc_tape)

            dmu = weights.lambda1 * kl_loss_grad(path.mu) + latent_grads[index]
            dmu = dmu + bundle.decode_backward(
                weights.lambda2 * recon_l1_grad(path.x, path.recon), path.recon_domain, path.recon_tape
            )
            dmu = dmu + bundle.decode_backward(dtranslated, target, path.translate_tape)
            bundle.encode_backward(dmu, path.encode_tape)
        for (_, tape), grad in zip(self.extras, latent_grads[2:]):
            bundle.encode_backward(grad, tape)

    def backward_discriminator(self):
        """Reset the pair's discriminator gradients and fill them from the discriminator objective only."""
        bundle, weights, a, b = self.bundle, self.cfg.weights, *self.domains
        other = {a: b, b: a}
        for domain in (a, b):
            bundle.discriminators[domain].zero_grad()
        for domain in (a, b):
            real = self.paths[domain]
            fake = self.paths[other[domain]]
            d_real, d_fake = adversarial_loss_d_grad(real.real_scores, fake.fake_scores)
            bundle.discriminate_backward(weights.lambda0 * d_real, domain, real.real_tape)
            # input gradients are dropped: the fakes are detached
            bundle.discriminate_backward(weights.lambda0 * d_fake, domain, fake.fake_tape)


def train_pair_step(
    bundle: ModelBundle,
    batch_a: ExcerptBatch,
    batch_b: ExcerptBatch,
    cfg: TrainConfig,
    optimizers: Optimizers,
    rng: np.random.Generator,
    extra_batches=(),
) -> LossReport:
    """Run one simultaneous generator/discriminator update for the pair and return its losses."""
    step = PairStep(bundle, batch_a, batch_b, cfg, rng, extra_batches)
    report = step.forward()
    bundle.zero_grad()
    step.backward_generator()
    step.backward_discriminator()
    domains = list(step.domains)
    optimizers.generator.step(bundle.generator_parameter_names(domains))
    optimizers.discriminator.step(bundle.discriminator_parameter_names(domains))
    return report
