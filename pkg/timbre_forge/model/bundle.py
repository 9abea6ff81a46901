"""
The full set of networks for a group of timbre domains.

One universal encoder and one shared decoder-entry residual block serve every
domain; each domain owns a decoder and a discriminator.
"""

import logging

import numpy as np
from attrs import asdict, field, frozen, validators

from .. import settings
from ..exceptions import ConfigError, ShapeError, UnknownDomain
from ..keys import validate_domain_name
from ..nn.layers import Module
from .blocks import (
    LATENT_CHANNELS,
    LATENT_SIZE,
    RESIDUAL_KINDS,
    ResidualBlock,
    build_decoder,
    build_discriminator,
    build_encoder,
)

logger = logging.getLogger(__name__)

TOPOLOGIES = ("one_to_one", "many_to_many")
INPUT_SHAPE = (1, settings.EXCERPT_FRAMES, settings.N_MELS)


@frozen
class VariantFlags:
    """Architecture and objective switches distinguishing the model versions."""

    residual_kind: str = field(default="basic", validator=validators.in_(RESIDUAL_KINDS))
    cyclic_kld: bool = field(default=True, validator=validators.instance_of(bool))
    topology: str = field(default="one_to_one", validator=validators.in_(TOPOLOGIES))

    @classmethod
    def preset(cls, name: str) -> "VariantFlags":
        """Flags for one of the named model versions."""
        try:
            return VARIANT_PRESETS[name]
        except KeyError as err:
            raise ConfigError("Unknown variant", {"variant": f"{name!r} not in {sorted(VARIANT_PRESETS)}"}) from err

    def as_dict(self) -> dict:
        return asdict(self)


VARIANT_PRESETS = {
    "initial": VariantFlags(),
    "no-kld-cyclic": VariantFlags(cyclic_kld=False),
    "bottleneck-residual": VariantFlags(residual_kind="bottleneck"),
    "many-to-many": VariantFlags(topology="many_to_many"),
}


def check_domains(domains, topology: str) -> list[str]:
    """Validate a domain list against a topology and return it as a list."""
    domains = [validate_domain_name(name) for name in domains]
    duplicates = sorted({name for name in domains if domains.count(name) > 1})
    if duplicates:
        raise ConfigError("Duplicate domain names", {"domains": ", ".join(duplicates)})
    if len(domains) < 2:
        raise ConfigError("At least two domains are required", {"domains": f"got {len(domains)}"})
    if topology == "one_to_one" and len(domains) != 2:
        raise ConfigError("one_to_one topology takes exactly two domains", {"domains": f"got {len(domains)}"})
    return domains


def reparameterize(mu: np.ndarray, rng: np.random.Generator | None = None, deterministic: bool = False) -> np.ndarray:
    """
    Sample ``z = mu + noise`` with unit-variance Gaussian noise.

    In deterministic mode ``mu`` itself is returned. The gradient of ``z``
    with respect to ``mu`` is the identity either way.
    """
    if deterministic:
        return mu
    if rng is None:
        raise ValueError("A random generator is required unless deterministic=True")
    return mu + rng.standard_normal(mu.shape).astype(mu.dtype, copy=False)


class ModelBundle(Module):
    """Encoder, shared block, and one decoder and discriminator per domain."""

    def __init__(self, domains, variant: VariantFlags | None = None, seed: int = 0, dtype=np.float32):
        variant = variant or VariantFlags()
        domains = check_domains(domains, variant.topology)
        rng = np.random.default_rng(seed)
        self.encoder = build_encoder(variant.residual_kind, rng, dtype)
        self.shared = ResidualBlock(LATENT_CHANNELS, variant.residual_kind, rng, dtype)
        self.decoders = {name: build_decoder(variant.residual_kind, rng, dtype) for name in domains}
        self.discriminators = {name: build_discriminator(rng, dtype) for name in domains}
        self._domains = domains
        self._variant = variant
        self._seed = seed

    @property
    def domains(self) -> list[str]:
        return list(self._domains)

    @property
    def variant(self) -> VariantFlags:
        return self._variant

    @property
    def seed(self) -> int:
        return self._seed

    def _check_domain(self, domain: str):
        if domain not in self.decoders:
            raise UnknownDomain(domain, self._domains)

    # Forward passes return (output, tape); the tape feeds the matching backward.

    def encode(self, x: np.ndarray):
        """Batch of 1x128x128 patches -> latent means, batch x 128 x 16 x 16."""
        if x.ndim != 4 or x.shape[1:] != INPUT_SHAPE:
            raise ShapeError("Encoder input must be batch x 1 x 128 x 128", expected=INPUT_SHAPE, got=x.shape)
        return self.encoder.forward(x)

    def encode_backward(self, dmu: np.ndarray, tape) -> np.ndarray:
        return self.encoder.backward(dmu, tape)

    def decode(self, z: np.ndarray, domain: str):
        """Latent codes -> patches in [0, 1] through the shared block and ``domain``'s decoder."""
        self._check_domain(domain)
        expected = (LATENT_CHANNELS, LATENT_SIZE, LATENT_SIZE)
        if z.ndim != 4 or z.shape[1:] != expected:
            raise ShapeError("Latent code has the wrong shape", expected=expected, got=z.shape)
        hidden, shared_tape = self.shared.forward(z)
        out, decoder_tape = self.decoders[domain].forward(hidden)
        return out, (shared_tape, decoder_tape)

    def decode_backward(self, dout: np.ndarray, domain: str, tape) -> np.ndarray:
        shared_tape, decoder_tape = tape
        dhidden = self.decoders[domain].backward(dout, decoder_tape)
        return self.shared.backward(dhidden, shared_tape)

    def discriminate(self, x: np.ndarray, domain: str):
        """Patches -> raw batch x 1 x 4 x 4 score grids from ``domain``'s discriminator."""
        self._check_domain(domain)
        if x.ndim != 4 or x.shape[1:] != INPUT_SHAPE:
            raise ShapeError("Discriminator input must be batch x 1 x 128 x 128", expected=INPUT_SHAPE, got=x.shape)
        return self.discriminators[domain].forward(x)

    def discriminate_backward(self, dscores: np.ndarray, domain: str, tape) -> np.ndarray:
        return self.discriminators[domain].backward(dscores, tape)

    def translate(self, x: np.ndarray, source: str, target: str, deterministic: bool = True,
                  rng: np.random.Generator | None = None) -> np.ndarray:
        """Encode ``x`` (from ``source``) and decode it as ``target``."""
        self._check_domain(source)
        mu, _ = self.encode(x)
        out, _ = self.decode(reparameterize(mu, rng, deterministic), target)
        return out

    # Parameter groups

    def generator_parameter_names(self, domains) -> list[str]:
        """Encoder, shared block and the decoders of ``domains``."""
        prefixes = ["encoder.", "shared."] + [f"decoders.{name}." for name in domains]
        return [name for name, _ in self.named_parameters() if name.startswith(tuple(prefixes))]

    def discriminator_parameter_names(self, domains) -> list[str]:
        prefixes = tuple(f"discriminators.{name}." for name in domains)
        return [name for name, _ in self.named_parameters() if name.startswith(prefixes)]

    def parameter_report(self) -> dict[str, int]:
        """Parameter counts per component plus the total."""
        report = {"encoder": self.encoder.parameter_count(), "shared": self.shared.parameter_count()}
        for name in self._domains:
            report[f"decoder.{name}"] = self.decoders[name].parameter_count()
        for name in self._domains:
            report[f"discriminator.{name}"] = self.discriminators[name].parameter_count()
        report["total"] = self.parameter_count()
        return report


def build_model(domains, variant: VariantFlags | None = None, seed: int = 0, dtype=np.float32) -> ModelBundle:
    """Construct and log a freshly initialized bundle."""
    bundle = ModelBundle(domains, variant, seed, dtype)
    report = bundle.parameter_report()
    logger.info(
        "[Model] Built %s/%s model for %s: %d parameters",
        bundle.variant.residual_kind, bundle.variant.topology, ", ".join(bundle.domains), report["total"],
    )
    for component, count in report.items():
        logger.debug("[Model]   %s: %d", component, count)
    return bundle
