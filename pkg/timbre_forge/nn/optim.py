"""
Adam and the learning-rate schedule.
"""

import logging
from collections.abc import Iterable

import numpy as np
from attrs import define, field, frozen, validators

from ..exceptions import NanGradient
from .layers import Parameter

logger = logging.getLogger(__name__)


def _unit_interval(_instance, attribute, value):
    if not 0.0 <= value < 1.0:
        raise ValueError(f"{attribute.name} must lie in [0, 1), got {value}")


@frozen
class OptimizerConfig:
    """Adam hyperparameters."""

    lr: float = field(default=1e-4, converter=float, validator=validators.gt(0.0))
    beta1: float = field(default=0.5, converter=float, validator=_unit_interval)
    beta2: float = field(default=0.999, converter=float, validator=_unit_interval)
    eps: float = field(default=1e-8, converter=float, validator=validators.gt(0.0))


@define
class AdamState:
    """Moments and step counts, keyed by parameter name."""

    config: OptimizerConfig = field(factory=OptimizerConfig)
    lr: float | None = None
    steps: dict[str, int] = field(factory=dict)
    first_moment: dict[str, np.ndarray] = field(factory=dict)
    second_moment: dict[str, np.ndarray] = field(factory=dict)

    def __attrs_post_init__(self):
        if self.lr is None:
            self.lr = self.config.lr

    @property
    def step_count(self) -> int:
        """The largest per-parameter step count."""
        return max(self.steps.values(), default=0)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState):
    """
    Apply one bias-corrected Adam update to ``params`` in place.

    Every gradient is checked before any parameter moves, so a NaN leaves
    parameters and state untouched.
    """
    for name, grad in grads.items():
        if not np.isfinite(grad).all():
            raise NanGradient(name)
    beta1, beta2, eps = state.config.beta1, state.config.beta2, state.config.eps
    for name, grad in grads.items():
        param = params[name]
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m, v = np.zeros_like(param), np.zeros_like(param)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        step = state.steps.get(name, 0) + 1
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        param -= (state.lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype, copy=False)
        state.first_moment[name] = m.astype(param.dtype, copy=False)
        state.second_moment[name] = v.astype(param.dtype, copy=False)
        state.steps[name] = step


class Adam:
    """Adam over a fixed set of named parameters."""

    def __init__(self, named_parameters: Iterable[tuple[str, Parameter]], config: OptimizerConfig | None = None):
        self.parameters = dict(named_parameters)
        self.state = AdamState(config or OptimizerConfig())

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float):
        self.state.lr = float(value)

    def step(self, names: Iterable[str] | None = None):
        """Update the named parameters (all of them by default) from their gradients."""
        selected = list(self.parameters) if names is None else list(names)
        params = {name: self.parameters[name].data for name in selected}
        grads = {name: self.parameters[name].grad for name in selected}
        adam_step(params, grads, self.state)

    def zero_grad(self):
        for parameter in self.parameters.values():
            parameter.grad = np.zeros_like(parameter.data)


def lr_schedule(epoch: int, max_epochs: int, base_lr: float) -> float:
    """
    Constant learning rate for the first half of training, then linear decay to zero.

    ``epoch`` is zero-based and must be below ``max_epochs``.
    """
    if max_epochs < 1 or not 0 <= epoch < max_epochs:
        raise ValueError(f"epoch must lie in [0, {max_epochs}), got {epoch}")
    halfway = max_epochs / 2.0
    if epoch <= halfway:
        return float(base_lr)
    return float(base_lr) * (max_epochs - epoch) / (max_epochs - halfway)
