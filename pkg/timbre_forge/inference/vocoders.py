"""
Vocoders: mel grid in, waveform out.

Griffin-Lim is built in. Other implementations are found by name in the
registry, then among the ``timbre_forge.vocoders`` entry points, and finally
as a ``"package.module:attribute"`` import path.
"""

import importlib
import logging
from collections.abc import Callable
from importlib.metadata import entry_points
from typing import Protocol

from .. import settings
from ..audio.clip import AudioClip
from ..exceptions import ConfigError
from ..melspec.griffin_lim import fast_griffin_lim
from ..melspec.transforms import MelSpectrogram, StftConfig, invert_mel

logger = logging.getLogger(__name__)

ENTRY_POINT_GROUP = "timbre_forge.vocoders"


class Vocoder(Protocol):
    """Anything that turns a normalized mel grid (with its statistics) into audio."""

    def vocode(self, mel: MelSpectrogram) -> AudioClip:
        ...


class GriffinLimVocoder:
    """Mel inversion to linear magnitudes followed by accelerated Griffin-Lim."""

    def __init__(
        self,
        stft: StftConfig | None = None,
        iterations: int = settings.GRIFFIN_LIM_ITERS,
        momentum: float = settings.GRIFFIN_LIM_MOMENTUM,
        inversion: str = "nnls",
    ):
        self.stft = stft or StftConfig()
        self.iterations = iterations
        self.momentum = momentum
        self.inversion = inversion

    def vocode(self, mel: MelSpectrogram) -> AudioClip:
        magnitude = invert_mel(mel, self.stft, self.inversion)
        return fast_griffin_lim(magnitude, self.stft, self.iterations, self.momentum)


_REGISTRY: dict[str, Callable[..., Vocoder]] = {"griffin-lim": GriffinLimVocoder}


def register_vocoder(name: str, factory: Callable[..., Vocoder]):
    """Make ``factory`` available as ``name``; it is called with the vocoder options."""
    _REGISTRY[name] = factory


def available_vocoders() -> list[str]:
    names = set(_REGISTRY)
    names.update(entry.name for entry in entry_points(group=ENTRY_POINT_GROUP))
    return sorted(names)


def _resolve(name: str) -> Callable[..., Vocoder]:
    if name in _REGISTRY:
        return _REGISTRY[name]
    for entry in entry_points(group=ENTRY_POINT_GROUP):
        if entry.name == name:
            return entry.load()
    if ":" in name:
        module_name, _, attribute = name.partition(":")
        try:
            return getattr(importlib.import_module(module_name), attribute)
        except (ImportError, AttributeError) as err:
            raise ConfigError("Cannot import vocoder", {"vocoder": f"{name}: {err}"}) from err
    raise ConfigError("Unknown vocoder", {"vocoder": f"{name!r} not in {available_vocoders()}"})


def get_vocoder(name: str = "griffin-lim", **options) -> Vocoder:
    """Build the vocoder registered as ``name``."""
    vocoder = _resolve(name)(**options)
    if not callable(getattr(vocoder, "vocode", None)):
        raise ConfigError("Not a vocoder", {"vocoder": f"{name} has no vocode() method"})
    logger.debug("[Vocoder] Using %s", name)
    return vocoder
