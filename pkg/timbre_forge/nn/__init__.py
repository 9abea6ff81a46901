"""
A small set of differentiable operators, layers and the Adam optimizer.
"""

from .layers import (
    Conv2d,
    ConvTranspose2d,
    InstanceNorm2d,
    LeakyReLU,
    Module,
    Parameter,
    ReflectionPad2d,
    ReLU,
    Sequential,
    Tanh01,
)
from .optim import Adam, AdamState, OptimizerConfig, adam_step, lr_schedule

__all__ = [
    "Adam",
    "AdamState",
    "Conv2d",
    "ConvTranspose2d",
    "InstanceNorm2d",
    "LeakyReLU",
    "Module",
    "OptimizerConfig",
    "Parameter",
    "ReLU",
    "ReflectionPad2d",
    "Sequential",
    "Tanh01",
    "adam_step",
    "lr_schedule",
]
