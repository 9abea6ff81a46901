"""
Parameter containers and layers built on the functional operators.

A layer's ``forward`` returns ``(output, tape)``; ``backward(dout, tape)``
returns the input gradient and adds parameter gradients into each
``Parameter.grad``. Gradients accumulate until ``zero_grad`` is called, so a
module used on several paths in one step collects the sum.
"""

import math
from collections.abc import Iterator

import numpy as np

from ..exceptions import ShapeError
from . import functional as F


class Parameter:
    """A trainable array and its gradient accumulator."""

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray):
        self.data = data
        self.grad = np.zeros_like(data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def __repr__(self):
        return f"Parameter(shape={self.data.shape}, dtype={self.data.dtype})"


class Module:
    """Base class: parameter traversal, gradient reset, dtype conversion."""

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, dout: np.ndarray, tape):
        raise NotImplementedError

    def __call__(self, x: np.ndarray):
        return self.forward(x)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        """Yield ``(dotted_name, parameter)`` in definition order."""
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{index}.")
            elif isinstance(value, dict):
                for key, item in value.items():
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{key}.")

    def parameters(self) -> list[Parameter]:
        return [parameter for _, parameter in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(parameter.size for parameter in self.parameters())

    def zero_grad(self):
        for parameter in self.parameters():
            parameter.grad = np.zeros_like(parameter.data)

    def astype(self, dtype) -> "Module":
        """Convert every parameter (and its gradient) in place; returns self."""
        for parameter in self.parameters():
            parameter.data = parameter.data.astype(dtype)
            parameter.grad = parameter.grad.astype(dtype)
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: parameter.data for name, parameter in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        """Copy arrays into this module's parameters; names and shapes must match exactly."""
        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing, extra = sorted(set(own) - set(state)), sorted(set(state) - set(own))
            raise ShapeError(
                "Parameter names differ", expected=missing or "no extra names", got=extra or "missing names"
            )
        for name, parameter in own.items():
            value = np.asarray(state[name])
            if value.shape != parameter.data.shape:
                raise ShapeError(
                    f"Parameter {name} has the wrong shape", expected=parameter.data.shape, got=value.shape
                )
            parameter.data = value.astype(parameter.data.dtype, copy=True)
            parameter.grad = np.zeros_like(parameter.data)


def kaiming_normal(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    """He initialization with fan-in scaling."""
    return (rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2d(Module):
    def __init__(self, in_channels, out_channels, kernel, rng, stride=1, pad=0, pad_mode="zero", dtype=np.float32):
        self.weight = Parameter(
            kaiming_normal(rng, (out_channels, in_channels, kernel, kernel), in_channels * kernel * kernel, dtype)
        )
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype))
        self.stride = stride
        self.pad = pad
        self.pad_mode = pad_mode

    def forward(self, x):
        return F.conv2d(x, self.weight.data, self.bias.data, self.stride, self.pad, self.pad_mode)

    def backward(self, dout, tape):
        dx, dweight, dbias = F.conv2d_backward(dout, tape)
        self.weight.grad += dweight
        self.bias.grad += dbias
        return dx


class ConvTranspose2d(Module):
    def __init__(self, in_channels, out_channels, kernel, rng, stride=1, pad=0, output_pad=0, dtype=np.float32):
        self.weight = Parameter(
            kaiming_normal(rng, (in_channels, out_channels, kernel, kernel), out_channels * kernel * kernel, dtype)
        )
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype))
        self.stride = stride
        self.pad = pad
        self.output_pad = output_pad

    def forward(self, x):
        return F.conv_transpose2d(x, self.weight.data, self.bias.data, self.stride, self.pad, self.output_pad)

    def backward(self, dout, tape):
        dx, dweight, dbias = F.conv_transpose2d_backward(dout, tape)
        self.weight.grad += dweight
        self.bias.grad += dbias
        return dx


class ReflectionPad2d(Module):
    def __init__(self, pad: int):
        self.pad = pad

    def forward(self, x):
        return F.reflection_pad2d(x, self.pad)

    def backward(self, dout, tape):
        return F.reflection_pad2d_backward(dout, tape)


class InstanceNorm2d(Module):
    def __init__(self, eps: float = F.INSTANCE_NORM_EPS):
        self.eps = eps

    def forward(self, x):
        return F.instance_norm(x, self.eps)

    def backward(self, dout, tape):
        return F.instance_norm_backward(dout, tape)


class LeakyReLU(Module):
    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def forward(self, x):
        return F.leaky_relu(x, self.slope)

    def backward(self, dout, tape):
        return F.leaky_relu_backward(dout, tape)


class ReLU(LeakyReLU):
    def __init__(self):
        super().__init__(0.0)


class Tanh01(Module):
    def forward(self, x):
        return F.tanh01(x)

    def backward(self, dout, tape):
        return F.tanh01_backward(dout, tape)


class Sequential(Module):
    """Layers applied in order; the tape is the list of per-layer tapes."""

    def __init__(self, *layers: Module):
        self.layers = list(layers)

    def forward(self, x):
        tapes = []
        for layer in self.layers:
            x, tape = layer.forward(x)
            tapes.append(tape)
        return x, tapes

    def backward(self, dout, tape):
        for layer, layer_tape in zip(reversed(self.layers), reversed(tape)):
            dout = layer.backward(dout, layer_tape)
        return dout

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, index):
        return self.layers[index]
