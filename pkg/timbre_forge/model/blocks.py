"""
Network building blocks: residual blocks, the universal encoder, domain decoders and discriminators.

All spatial sizes assume 128x128 single-channel input patches.
"""

import numpy as np

from ..exceptions import ConfigError, ShapeError
from ..nn.layers import (
    Conv2d,
    ConvTranspose2d,
    InstanceNorm2d,
    LeakyReLU,
    Module,
    ReflectionPad2d,
    ReLU,
    Sequential,
    Tanh01,
)

LATENT_CHANNELS = 128
LATENT_SIZE = 16
ENCODER_WIDTHS = (32, 64, 128)
DISCRIMINATOR_WIDTHS = (64, 128, 256, 512)
BOTTLENECK_REDUCTION = 4
LEAKY_SLOPE = 0.2
RESIDUAL_KINDS = ("basic", "bottleneck")


class ResidualBlock(Module):
    """``x + F(x)`` where F is either two 3x3 convs or a 1x1-3x3-1x1 bottleneck."""

    def __init__(self, channels: int, kind: str, rng: np.random.Generator, dtype=np.float32):
        if kind == "basic":
            self.branch = Sequential(
                ReflectionPad2d(1),
                Conv2d(channels, channels, 3, rng, dtype=dtype),
                InstanceNorm2d(),
                ReLU(),
                ReflectionPad2d(1),
                Conv2d(channels, channels, 3, rng, dtype=dtype),
                InstanceNorm2d(),
            )
        elif kind == "bottleneck":
            reduced = channels // BOTTLENECK_REDUCTION
            self.branch = Sequential(
                Conv2d(channels, reduced, 1, rng, dtype=dtype),
                InstanceNorm2d(),
                ReLU(),
                ReflectionPad2d(1),
                Conv2d(reduced, reduced, 3, rng, dtype=dtype),
                InstanceNorm2d(),
                ReLU(),
                Conv2d(reduced, channels, 1, rng, dtype=dtype),
                InstanceNorm2d(),
            )
        else:
            raise ConfigError("Unknown residual block kind", {"residual_kind": f"{kind!r} not in {RESIDUAL_KINDS}"})
        self.channels = channels
        self.kind = kind

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeError("Residual block channel mismatch", expected=self.channels, got=x.shape)
        out, tape = self.branch.forward(x)
        return x + out, tape

    def backward(self, dout, tape):
        return dout + self.branch.backward(dout, tape)


def _down(in_channels, out_channels, rng, dtype, norm=True):
    layers = [Conv2d(in_channels, out_channels, 4, rng, stride=2, pad=1, dtype=dtype), LeakyReLU(LEAKY_SLOPE)]
    if norm:
        layers.append(InstanceNorm2d())
    return layers


def build_encoder(kind: str, rng: np.random.Generator, dtype=np.float32) -> Sequential:
    """1x128x128 -> 128x16x16 latent mean."""
    first, second, third = ENCODER_WIDTHS
    return Sequential(
        ReflectionPad2d(3),
        Conv2d(1, first, 7, rng, stride=2, dtype=dtype),
        LeakyReLU(LEAKY_SLOPE),
        InstanceNorm2d(),
        *_down(first, second, rng, dtype),
        *_down(second, third, rng, dtype),
        *(ResidualBlock(third, kind, rng, dtype) for _ in range(3)),
    )


def build_decoder(kind: str, rng: np.random.Generator, dtype=np.float32) -> Sequential:
    """
    Domain-specific part of a decoder: 128x16x16 (after the shared block) -> 1x128x128 in [0, 1].

    Transposed convs mirror the encoder; the last one uses output padding 1 to land on 128.
    """
    first, second, third = ENCODER_WIDTHS
    return Sequential(
        ResidualBlock(third, kind, rng, dtype),
        ResidualBlock(third, kind, rng, dtype),
        ConvTranspose2d(third, second, 4, rng, stride=2, pad=1, dtype=dtype),
        LeakyReLU(LEAKY_SLOPE),
        InstanceNorm2d(),
        ConvTranspose2d(second, first, 4, rng, stride=2, pad=1, dtype=dtype),
        LeakyReLU(LEAKY_SLOPE),
        InstanceNorm2d(),
        ConvTranspose2d(first, 1, 7, rng, stride=2, pad=3, output_pad=1, dtype=dtype),
        Tanh01(),
    )


def build_discriminator(rng: np.random.Generator, dtype=np.float32) -> Sequential:
    """1x128x128 -> 1x4x4 raw least-squares scores."""
    layers = []
    in_channels = 1
    for index, width in enumerate(DISCRIMINATOR_WIDTHS):
        layers.extend(_down(in_channels, width, rng, dtype, norm=index > 0))
        in_channels = width
    layers.append(Conv2d(in_channels, 1, 3, rng, stride=2, pad=1, dtype=dtype))
    return Sequential(*layers)
