"""
VAE-GAN networks for timbre transfer.
"""

from .blocks import ResidualBlock
from .bundle import (
    VARIANT_PRESETS,
    ModelBundle,
    VariantFlags,
    build_model,
    reparameterize,
)

__all__ = ["VARIANT_PRESETS", "ModelBundle", "ResidualBlock", "VariantFlags", "build_model", "reparameterize"]
