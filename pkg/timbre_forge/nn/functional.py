"""
Differentiable operators on batch x channels x height x width arrays.

Every forward function returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache and returns the input gradient
(plus parameter gradients where the op has parameters). Outputs keep the
input dtype, so the same code runs in float32 for training and float64 for
gradient checks.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import settings
from ..exceptions import NumericalError, PadError, ShapeError

INSTANCE_NORM_EPS = 1e-5


def _finite(name: str, out: np.ndarray) -> np.ndarray:
    if settings.debug_finite_checks() and not np.isfinite(out).all():
        raise NumericalError(f"{name} produced non-finite values")
    return out


def _check_4d(name: str, x: np.ndarray):
    if x.ndim != 4:
        raise ShapeError(f"{name} expects a 4-D input", expected="(batch, channels, height, width)", got=x.shape)


def _scatter_windows(target: np.ndarray, patches: np.ndarray, stride: int, rows: int, cols: int):
    """Add ``patches`` (B, C, rows, cols, K, K) into ``target`` at stride-spaced window positions."""
    kernel = patches.shape[-1]
    for ki in range(kernel):
        for kj in range(kernel):
            target[:, :, ki:ki + stride * (rows - 1) + 1:stride, kj:kj + stride * (cols - 1) + 1:stride] += (
                patches[..., ki, kj]
            )


# -------------------------------------------------------------------------
# Padding
# -------------------------------------------------------------------------

def _reflect_index(size: int, pad: int) -> np.ndarray:
    index = np.abs(np.arange(-pad, size + pad))
    return np.where(index >= size, 2 * (size - 1) - index, index)


def reflection_pad2d(x: np.ndarray, pad: int):
    """Mirror ``pad`` rows and columns at each border without repeating the edge."""
    _check_4d("reflection_pad2d", x)
    height, width = x.shape[2:]
    if pad >= min(height, width):
        raise PadError(
            "Reflection padding must be smaller than the padded dimension", expected=f"< {min(height, width)}", got=pad
        )
    if pad == 0:
        return x, (x.shape, None, None)
    rows, cols = _reflect_index(height, pad), _reflect_index(width, pad)
    return x[:, :, rows][:, :, :, cols], (x.shape, rows, cols)


def reflection_pad2d_backward(dout: np.ndarray, cache) -> np.ndarray:
    shape, rows, cols = cache
    if rows is None:
        return dout
    partial = np.zeros(shape[:3] + (dout.shape[3],), dtype=dout.dtype)
    np.add.at(partial, (slice(None), slice(None), rows), dout)
    dx = np.zeros(shape, dtype=dout.dtype)
    np.add.at(dx, (slice(None), slice(None), slice(None), cols), partial)
    return dx


def zero_pad2d(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


# -------------------------------------------------------------------------
# Convolutions
# -------------------------------------------------------------------------

def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None, stride: int = 1, pad: int = 0,
           pad_mode: str = "zero"):
    """
    Cross-correlate ``x`` with ``weight`` of shape (out, in, K, K).

    Output size per spatial axis is ``(size + 2 * pad - K) // stride + 1``.
    """
    _check_4d("conv2d", x)
    out_channels, in_channels, kernel, kernel_w = weight.shape
    if kernel != kernel_w:
        raise ShapeError("conv2d kernels must be square", expected=f"({kernel}, {kernel})", got=(kernel, kernel_w))
    if x.shape[1] != in_channels:
        raise ShapeError("conv2d channel mismatch", expected=in_channels, got=x.shape[1])
    if pad_mode == "reflect":
        padded, pad_cache = reflection_pad2d(x, pad)
    elif pad_mode == "zero":
        padded, pad_cache = zero_pad2d(x, pad), None
    else:
        raise ValueError(f"Unknown pad_mode {pad_mode!r}")
    if padded.shape[2] < kernel or padded.shape[3] < kernel:
        raise ShapeError("conv2d kernel larger than padded input", expected=f">= {kernel}", got=padded.shape[2:])

    windows = sliding_window_view(padded, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.reshape(1, out_channels, 1, 1)
    out = np.ascontiguousarray(out, dtype=x.dtype)
    return _finite("conv2d", out), (x.shape, padded.shape, windows, weight, stride, pad, pad_mode, pad_cache)


def conv2d_backward(dout: np.ndarray, cache):
    """Return ``(dx, dweight, dbias)``."""
    x_shape, padded_shape, windows, weight, stride, pad, pad_mode, pad_cache = cache
    rows, cols = dout.shape[2:]
    dweight = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3])).astype(weight.dtype, copy=False)
    dbias = dout.sum(axis=(0, 2, 3))
    patches = np.tensordot(dout, weight, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
    dpadded = np.zeros(padded_shape, dtype=dout.dtype)
    _scatter_windows(dpadded, patches, stride, rows, cols)
    if pad_mode == "reflect":
        dx = reflection_pad2d_backward(dpadded, pad_cache)
    else:
        dx = dpadded[:, :, pad:padded_shape[2] - pad, pad:padded_shape[3] - pad] if pad else dpadded
    assert dx.shape == x_shape
    return dx, dweight, dbias


def conv_transpose2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None, stride: int = 1,
                     pad: int = 0, output_pad: int = 0):
    """
    Transposed convolution with ``weight`` of shape (in, out, K, K).

    Output size per spatial axis is ``(size - 1) * stride - 2 * pad + K + output_pad``.
    """
    _check_4d("conv_transpose2d", x)
    in_channels, out_channels, kernel, kernel_w = weight.shape
    if kernel != kernel_w:
        raise ShapeError(
            "conv_transpose2d kernels must be square", expected=f"({kernel}, {kernel})", got=(kernel, kernel_w)
        )
    if x.shape[1] != in_channels:
        raise ShapeError("conv_transpose2d channel mismatch", expected=in_channels, got=x.shape[1])
    if output_pad >= stride:
        raise ShapeError("output_pad must be smaller than stride", expected=f"< {stride}", got=output_pad)
    batch, _, height, width = x.shape
    buffer_h = (height - 1) * stride + kernel + output_pad
    buffer_w = (width - 1) * stride + kernel + output_pad
    if buffer_h - 2 * pad <= 0 or buffer_w - 2 * pad <= 0:
        raise ShapeError(
            "conv_transpose2d padding removes the whole output", expected=f"pad < {buffer_h // 2}", got=pad
        )

    patches = np.tensordot(x, weight, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
    buffer = np.zeros((batch, out_channels, buffer_h, buffer_w), dtype=x.dtype)
    _scatter_windows(buffer, patches, stride, height, width)
    out = buffer[:, :, pad:buffer_h - pad, pad:buffer_w - pad]
    if bias is not None:
        out = out + bias.reshape(1, out_channels, 1, 1)
    out = np.ascontiguousarray(out, dtype=x.dtype)
    return _finite("conv_transpose2d", out), (x, weight, stride, pad, (buffer_h, buffer_w))


def conv_transpose2d_backward(dout: np.ndarray, cache):
    """Return ``(dx, dweight, dbias)``."""
    x, weight, stride, pad, (buffer_h, buffer_w) = cache
    height, width = x.shape[2:]
    kernel = weight.shape[2]
    dbuffer = np.zeros(dout.shape[:2] + (buffer_h, buffer_w), dtype=dout.dtype)
    dbuffer[:, :, pad:buffer_h - pad, pad:buffer_w - pad] = dout
    windows = sliding_window_view(dbuffer, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows[:, :, :height, :width]
    dx = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    dweight = np.tensordot(x, windows, axes=([0, 2, 3], [0, 2, 3])).astype(weight.dtype, copy=False)
    dbias = dout.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(dx), dweight, dbias


# -------------------------------------------------------------------------
# Normalization and activations
# -------------------------------------------------------------------------

def instance_norm(x: np.ndarray, eps: float = INSTANCE_NORM_EPS):
    """Normalize every (batch, channel) plane to zero mean and unit variance. No affine terms."""
    _check_4d("instance_norm", x)
    mean = x.mean(axis=(2, 3), keepdims=True)
    centered = x - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=(2, 3), keepdims=True) + eps)
    out = (centered * inv_std).astype(x.dtype, copy=False)
    return _finite("instance_norm", out), (out, inv_std)


def instance_norm_backward(dout: np.ndarray, cache) -> np.ndarray:
    normalized, inv_std = cache
    dmean = dout.mean(axis=(2, 3), keepdims=True)
    dproj = (dout * normalized).mean(axis=(2, 3), keepdims=True)
    return ((dout - dmean - normalized * dproj) * inv_std).astype(dout.dtype, copy=False)


def leaky_relu(x: np.ndarray, slope: float = 0.2):
    positive = x > 0
    out = np.where(positive, x, x * slope).astype(x.dtype, copy=False)
    return _finite("leaky_relu", out), (positive, slope)


def leaky_relu_backward(dout: np.ndarray, cache) -> np.ndarray:
    positive, slope = cache
    return np.where(positive, dout, dout * slope).astype(dout.dtype, copy=False)


def relu(x: np.ndarray):
    return leaky_relu(x, 0.0)


relu_backward = leaky_relu_backward


def tanh01(x: np.ndarray):
    """Squash into [0, 1] with ``(tanh(x) + 1) / 2``."""
    t = np.tanh(x)
    return _finite("tanh01", ((t + 1.0) * 0.5).astype(x.dtype, copy=False)), t


def tanh01_backward(dout: np.ndarray, cache) -> np.ndarray:
    t = cache
    return (dout * 0.5 * (1.0 - t * t)).astype(dout.dtype, copy=False)
