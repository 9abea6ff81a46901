"""
Training configuration: the TrainConfig record, JSON loading and validation.
"""

import json
import logging
import math
from pathlib import Path

from attrs import asdict, evolve, field, fields, frozen, validators

from ..audio.manifest import DatasetManifest, load_manifest
from ..exceptions import ConfigError, TimbreForgeError
from ..losses import LossWeights
from ..model.bundle import VariantFlags, check_domains
from ..nn.optim import OptimizerConfig

logger = logging.getLogger(__name__)

VAE_RECON_PATHS = ("self", "inverse")
LATENT_SCOPES = ("pair", "all")
NORM_SCOPES = ("sample", "domain")

_positive_int = [validators.instance_of(int), validators.ge(1)]


def _optional_positive_int(_instance, attribute, value):
    if value is not None and (not isinstance(value, int) or value < 1):
        raise ValueError(f"{attribute.name} must be a positive integer or null, got {value!r}")


@frozen
class TrainConfig:
    """Everything a training run needs besides the data itself."""

    domains: tuple[str, ...] = field(converter=tuple)
    epochs: int = field(default=100, validator=_positive_int)
    batch_size: int = field(default=4, validator=_positive_int)
    steps_per_epoch: int | None = field(default=None, validator=_optional_positive_int)
    checkpoint_every: int = field(default=25, validator=_positive_int)
    seed: int = field(default=0, validator=validators.instance_of(int))
    weights: LossWeights = field(factory=LossWeights)
    optimizer: OptimizerConfig = field(factory=OptimizerConfig)
    variant: VariantFlags = field(factory=VariantFlags)
    vae_recon_path: str = field(default="self", validator=validators.in_(VAE_RECON_PATHS))
    latent_scope: str = field(default="pair", validator=validators.in_(LATENT_SCOPES))
    norm_scope: str = field(default="sample", validator=validators.in_(NORM_SCOPES))
    manifest: str | None = None

    def __attrs_post_init__(self):
        check_domains(self.domains, self.variant.topology)

    def to_dict(self) -> dict:
        """JSON-ready dict with every field, defaults included."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        """
        Build a config from parsed JSON.

        Unknown keys are rejected. Nested ``weights``, ``optimizer`` and
        ``variant`` objects may be partial; ``variant`` may also name a preset.
        All field problems are collected into one ConfigError.
        """
        if not isinstance(data, dict):
            raise ConfigError("Configuration must be a JSON object")
        known = {attribute.name for attribute in fields(cls)}
        errors = {key: "unknown key" for key in data if key not in known}
        if "domains" not in data:
            errors["domains"] = "required"

        kwargs = {key: value for key, value in data.items() if key in known}
        for key, record in (("weights", LossWeights), ("optimizer", OptimizerConfig), ("variant", VariantFlags)):
            if key not in kwargs:
                continue
            value = kwargs[key]
            try:
                if key == "variant" and isinstance(value, str):
                    kwargs[key] = VariantFlags.preset(value)
                elif isinstance(value, dict):
                    unknown = sorted(set(value) - {attribute.name for attribute in fields(record)})
                    if unknown:
                        raise ConfigError(f"unknown keys {unknown}")
                    kwargs[key] = record(**value)
                else:
                    raise ConfigError("must be an object")
            except (TypeError, ValueError, ConfigError) as err:
                errors[key] = str(err)

        if not errors:
            for attribute in fields(cls):
                if attribute.name not in kwargs or attribute.name in ("weights", "optimizer", "variant"):
                    continue
                try:
                    evolve(_PROBE, **{attribute.name: kwargs[attribute.name]})
                except (TypeError, ValueError, ConfigError) as err:
                    errors[attribute.name] = str(err)
        if errors:
            raise ConfigError("Invalid training configuration", errors)
        try:
            return cls(**kwargs)
        except ConfigError as err:
            raise ConfigError("Invalid training configuration", {"domains": str(err)}) from err
        except (TypeError, ValueError) as err:
            raise ConfigError("Invalid training configuration", {"config": str(err)}) from err

    def resolved_steps_per_epoch(self, train_counts: dict[str, int]) -> int:
        """
        The configured steps per epoch, or one nominal pass over the training recordings.

        Each step draws ``batch_size`` excerpts from every domain.
        """
        if self.steps_per_epoch is not None:
            return self.steps_per_epoch
        total = sum(train_counts[name] for name in self.domains)
        return max(1, math.ceil(total / (len(self.domains) * self.batch_size)))


# A valid config used to check single fields in isolation.
_PROBE = TrainConfig(domains=("a", "b"), variant=VariantFlags(topology="many_to_many"))


def load_config(path) -> TrainConfig:
    """Read a TrainConfig from a JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path} is not valid JSON", {"config": str(err)}) from err
    return TrainConfig.from_dict(data)


def validate_config(path, manifest: DatasetManifest | None = None) -> TrainConfig:
    """
    Load and fully validate a config, including domain existence in the manifest.

    The manifest is taken from the argument or, failing that, from the
    config's ``manifest`` key resolved against the config file's directory.
    """
    path = Path(path)
    config = load_config(path)
    if manifest is None and config.manifest:
        manifest_path = path.parent / config.manifest
        try:
            manifest = load_manifest(manifest_path)
        except (OSError, TimbreForgeError) as err:
            raise ConfigError("Cannot read the manifest", {"manifest": str(err)}) from err
    if manifest is not None:
        missing = [name for name in config.domains if name not in manifest.domain_names]
        if missing:
            raise ConfigError("Domains missing from the manifest", {"domains": ", ".join(missing)})
    logger.info("[Config] %s is valid (%d domains, %s topology)", path, len(config.domains), config.variant.topology)
    return config
