"""
Single-file checkpoints.

Layout (little endian)::

    b"TFCK" | u32 version | u32 header length | JSON header | f32 payload | u32 CRC32

The JSON header echoes the training config and carries the domain list,
variant flags, epoch, global step, the sampler's RNG state, optimizer
learning rates and step counts, and a tensor directory of
``{name, shape, offset, count}`` entries (offsets in floats into the
payload). The CRC covers everything before it.
"""

import json
import logging
import os
import struct
import zlib
from pathlib import Path

import numpy as np
from attrs import frozen

from ..exceptions import (
    ChecksumError,
    ConfigError,
    FormatError,
    ShapeError,
    VersionError,
)
from ..model.bundle import ModelBundle, VariantFlags, build_model
from ..nn.optim import Adam, AdamState, OptimizerConfig
from .config import TrainConfig
from .step import Optimizers, make_optimizers

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"TFCK"
CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = ".tfck"
_PREAMBLE = struct.Struct("<4sII")
_CRC = struct.Struct("<I")

PARAMS = "params"
OPTIMIZER_GROUPS = ("generator", "discriminator")


@frozen(eq=False)
class Checkpoint:
    """Everything needed to resume training or run inference."""

    bundle: ModelBundle
    optimizers: Optimizers | None
    config: TrainConfig | None
    epoch: int
    step: int
    rng_state: dict | None


def _optimizer_header(optimizer: Adam) -> dict:
    state = optimizer.state
    return {
        "lr": state.lr,
        "config": {"lr": state.config.lr, "beta1": state.config.beta1, "beta2": state.config.beta2,
                   "eps": state.config.eps},
        "steps": dict(state.steps),
    }


def save_checkpoint(
    path,
    bundle: ModelBundle,
    optimizers: Optimizers | None = None,
    *,
    config: TrainConfig | None = None,
    epoch: int = 0,
    step: int = 0,
    rng: np.random.Generator | None = None,
) -> Path:
    """Write a checkpoint atomically (temporary file, then rename)."""
    tensors: list[tuple[str, np.ndarray]] = [(f"{PARAMS}/{name}", data) for name, data in bundle.state_dict().items()]
    header = {
        "format": "timbre-forge checkpoint",
        "config": config.to_dict() if config is not None else None,
        "domains": bundle.domains,
        "variant": bundle.variant.as_dict(),
        "seed": bundle.seed,
        "epoch": int(epoch),
        "step": int(step),
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "optimizers": None,
    }
    if optimizers is not None:
        header["optimizers"] = {}
        for group in OPTIMIZER_GROUPS:
            optimizer = getattr(optimizers, group)
            header["optimizers"][group] = _optimizer_header(optimizer)
            for name in sorted(optimizer.state.first_moment):
                tensors.append((f"{group}/m/{name}", optimizer.state.first_moment[name]))
                tensors.append((f"{group}/v/{name}", optimizer.state.second_moment[name]))

    directory, offset = [], 0
    for name, array in tensors:
        directory.append({"name": name, "shape": list(array.shape), "offset": offset, "count": int(array.size)})
        offset += int(array.size)
    header["tensors"] = directory
    header_bytes = json.dumps(header, sort_keys=True).encode("utf8")
    payload = b"".join(np.ascontiguousarray(array, dtype="<f4").tobytes() for _, array in tensors)
    body = _PREAMBLE.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)) + header_bytes + payload

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary = path.with_name(path.name + ".tmp")
    with temporary.open("wb") as handle:
        handle.write(body)
        handle.write(_CRC.pack(zlib.crc32(body)))
    os.replace(temporary, path)
    logger.info("[Checkpoint] Wrote %s (epoch %d, step %d, %d tensors)", path, epoch, step, len(tensors))
    return path


def _read(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _PREAMBLE.size or raw[:4] != CHECKPOINT_MAGIC:
        if len(raw) < _PREAMBLE.size and CHECKPOINT_MAGIC.startswith(raw[:4]):
            raise ChecksumError(f"{path} is truncated")
        raise FormatError(f"{path} is not a timbre-forge checkpoint")
    _, version, header_length = _PREAMBLE.unpack_from(raw)
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{path} has checkpoint version {version}; this build reads version {CHECKPOINT_VERSION}")
    if len(raw) < _PREAMBLE.size + header_length + _CRC.size:
        raise ChecksumError(f"{path} is truncated")
    body, (stored_crc,) = raw[:-_CRC.size], _CRC.unpack(raw[-_CRC.size:])
    if zlib.crc32(body) != stored_crc:
        raise ChecksumError(f"{path} failed its checksum (truncated or corrupt)")
    try:
        header = json.loads(body[_PREAMBLE.size:_PREAMBLE.size + header_length].decode("utf8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FormatError(f"{path} has an unreadable header") from err

    payload = np.frombuffer(body, dtype="<f4", offset=_PREAMBLE.size + header_length)
    tensors = {}
    for entry in header.get("tensors", []):
        start, count = entry["offset"], entry["count"]
        if start + count > payload.size:
            raise FormatError(f"{path}: tensor {entry['name']} runs past the payload")
        tensors[entry["name"]] = payload[start:start + count].reshape(entry["shape"]).astype(np.float32)
    return header, tensors


def _restore_optimizer(optimizer: Adam, header: dict, tensors: dict[str, np.ndarray], group: str):
    config = OptimizerConfig(**header["config"])
    state = AdamState(config=config, lr=header["lr"], steps={k: int(v) for k, v in header["steps"].items()})
    for name in header["steps"]:
        if name not in optimizer.parameters:
            raise ConfigError("Checkpoint optimizer state does not match the model", {group: f"unknown {name}"})
        state.first_moment[name] = tensors[f"{group}/m/{name}"]
        state.second_moment[name] = tensors[f"{group}/v/{name}"]
    optimizer.state = state


def restore_bundle(bundle: ModelBundle, header: dict, tensors: dict[str, np.ndarray]):
    """Load checkpoint parameters into an existing bundle; the architecture must match."""
    variant = VariantFlags(**header["variant"])
    if variant != bundle.variant or list(header["domains"]) != bundle.domains:
        raise ConfigError(
            "Checkpoint does not match the model",
            {"variant": f"checkpoint {variant.as_dict()} / {header['domains']}, "
                        f"model {bundle.variant.as_dict()} / {bundle.domains}"},
        )
    prefix = f"{PARAMS}/"
    state = {name[len(prefix):]: value for name, value in tensors.items() if name.startswith(prefix)}
    try:
        bundle.load_state_dict(state)
    except ShapeError as err:
        raise ConfigError("Checkpoint parameters do not match the model", {"params": str(err)}) from err


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint into a freshly built bundle with its optimizer states."""
    header, tensors = _read(path)
    try:
        variant = VariantFlags(**header["variant"])
        bundle = build_model(header["domains"], variant, seed=header["seed"])
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"{path} has an incomplete header") from err
    restore_bundle(bundle, header, tensors)

    config = TrainConfig.from_dict(header["config"]) if header.get("config") else None
    optimizers = None
    if header.get("optimizers"):
        optimizers = make_optimizers(bundle, config.optimizer if config else None)
        for group in OPTIMIZER_GROUPS:
            _restore_optimizer(getattr(optimizers, group), header["optimizers"][group], tensors, group)
    logger.info("[Checkpoint] Loaded %s (epoch %d, step %d)", path, header["epoch"], header["step"])
    return Checkpoint(bundle, optimizers, config, header["epoch"], header["step"], header.get("rng_state"))


def load_model(path) -> ModelBundle:
    """Just the bundle, for inference and evaluation."""
    return load_checkpoint(path).bundle


def checkpoint_name(epoch: int | None = None) -> str:
    """``epoch_0025.tfck`` for periodic checkpoints, ``final.tfck`` for the last one."""
    return "final.tfck" if epoch is None else f"epoch_{epoch:04d}{CHECKPOINT_SUFFIX}"
