"""
Tests for the differentiable operators: shapes, reference values and gradient checks.
"""

import numpy as np
import pytest

from timbre_forge.exceptions import NumericalError, PadError, ShapeError
from timbre_forge.nn import functional as F
from timbre_forge.nn.gradcheck import numerical_gradient, relative_error

SEEDS = range(20)
TOLERANCE = 1e-4


def _naive_conv(x, weight, bias, stride, pad):
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    batch, _, height, width = padded.shape
    out_channels, _, kernel, _ = weight.shape
    rows, cols = (height - kernel) // stride + 1, (width - kernel) // stride + 1
    out = np.zeros((batch, out_channels, rows, cols))
    for n in range(batch):
        for o in range(out_channels):
            for i in range(rows):
                for j in range(cols):
                    patch = padded[n, :, i * stride:i * stride + kernel, j * stride:j * stride + kernel]
                    out[n, o, i, j] = np.sum(patch * weight[o]) + bias[o]
    return out


def _naive_conv_transpose(x, weight, bias, stride, pad, output_pad):
    batch, in_channels, height, width = x.shape
    _, out_channels, kernel, _ = weight.shape
    size_h = (height - 1) * stride - 2 * pad + kernel + output_pad
    size_w = (width - 1) * stride - 2 * pad + kernel + output_pad
    out = np.zeros((batch, out_channels, size_h, size_w))
    for n in range(batch):
        for c in range(in_channels):
            for i in range(height):
                for j in range(width):
                    for ki in range(kernel):
                        for kj in range(kernel):
                            row, col = i * stride - pad + ki, j * stride - pad + kj
                            if 0 <= row < size_h and 0 <= col < size_w:
                                out[n, :, row, col] += x[n, c, i, j] * weight[c, :, ki, kj]
    return out + bias.reshape(1, -1, 1, 1)


def _check_gradients(forward, backward, arrays, rng):
    """Compare analytic gradients of sum(forward(*arrays) * R) with central differences."""
    out, cache = forward(*arrays)
    upstream = rng.standard_normal(out.shape)
    analytic = backward(upstream, cache)
    if not isinstance(analytic, tuple):
        analytic = (analytic,)

    def loss():
        return float(np.sum(forward(*arrays)[0] * upstream))

    for array, grad in zip(arrays, analytic):
        assert relative_error(grad, numerical_gradient(loss, array)) < TOLERANCE


class TestConv2d:
    """Tests for conv2d."""

    def test_encoder_entry_shape(self):
        """A 7x7 stride-2 conv with padding 3 halves a 128x128 input."""
        x = np.zeros((1, 1, 128, 128), dtype=np.float32)
        weight = np.zeros((32, 1, 7, 7), dtype=np.float32)

        out, _ = F.conv2d(x, weight, None, stride=2, pad=3, pad_mode="reflect")

        assert out.shape == (1, 32, 64, 64)
        assert out.dtype == np.float32

    def test_identity_kernel(self, rng):
        """A single 1x1 kernel of weight one returns the input."""
        x = rng.standard_normal((2, 1, 6, 5))
        out, _ = F.conv2d(x, np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(out, x)

    @pytest.mark.parametrize("stride, pad", [(1, 0), (1, 1), (2, 1), (2, 3)])
    def test_matches_naive_loops(self, rng, stride, pad):
        """The vectorized forward agrees with a direct quadruple loop."""
        x = rng.standard_normal((2, 3, 9, 9))
        weight = rng.standard_normal((4, 3, 3, 3))
        bias = rng.standard_normal(4)

        out, _ = F.conv2d(x, weight, bias, stride, pad)

        np.testing.assert_allclose(out, _naive_conv(x, weight, bias, stride, pad), atol=1e-5)

    def test_channel_mismatch(self):
        """Input channels must match the kernel."""
        with pytest.raises(ShapeError):
            F.conv2d(np.zeros((1, 2, 5, 5)), np.zeros((1, 3, 3, 3)))

    @pytest.mark.parametrize("seed", SEEDS)
    @pytest.mark.parametrize("stride, pad, pad_mode", [(1, 0, "zero"), (2, 1, "zero"), (1, 1, "reflect")])
    def test_gradients(self, seed, stride, pad, pad_mode):
        """Input, weight and bias gradients match finite differences."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((1, 2, 5, 5))
        weight = rng.standard_normal((3, 2, 3, 3))
        bias = rng.standard_normal(3)

        _check_gradients(
            lambda x_, w_, b_: F.conv2d(x_, w_, b_, stride, pad, pad_mode), F.conv2d_backward, (x, weight, bias), rng
        )


class TestConvTranspose2d:
    """Tests for conv_transpose2d."""

    def test_decoder_shape(self):
        """A 4x4 stride-2 transposed conv with padding 1 doubles 16x16 to 32x32."""
        out, _ = F.conv_transpose2d(np.zeros((1, 128, 16, 16)), np.zeros((128, 64, 4, 4)), None, 2, 1)
        assert out.shape == (1, 64, 32, 32)

    def test_output_layer_shape(self):
        """A 7x7 stride-2 transposed conv with padding 3 and output padding 1 doubles 64x64 to 128x128."""
        out, _ = F.conv_transpose2d(np.zeros((1, 32, 64, 64)), np.zeros((32, 1, 7, 7)), None, 2, 3, 1)
        assert out.shape == (1, 1, 128, 128)

    def test_identity_kernel(self, rng):
        """Stride 1 with a 1x1 kernel of weight one is the identity."""
        x = rng.standard_normal((1, 1, 4, 7))
        out, _ = F.conv_transpose2d(x, np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(out, x)

    @pytest.mark.parametrize("stride, pad, output_pad", [(1, 0, 0), (2, 1, 0), (2, 1, 1), (2, 3, 1)])
    def test_matches_naive_loops(self, rng, stride, pad, output_pad):
        """The scatter implementation agrees with the definition."""
        x = rng.standard_normal((2, 3, 5, 5))
        weight = rng.standard_normal((3, 2, 7, 7)) if pad == 3 else rng.standard_normal((3, 2, 4, 4))
        bias = rng.standard_normal(2)

        out, _ = F.conv_transpose2d(x, weight, bias, stride, pad, output_pad)

        np.testing.assert_allclose(out, _naive_conv_transpose(x, weight, bias, stride, pad, output_pad), atol=1e-5)

    def test_output_pad_must_be_below_stride(self):
        """Output padding has to be smaller than the stride."""
        with pytest.raises(ShapeError):
            F.conv_transpose2d(np.zeros((1, 1, 4, 4)), np.zeros((1, 1, 3, 3)), None, 1, 0, 1)

    @pytest.mark.parametrize("seed", SEEDS)
    @pytest.mark.parametrize("stride, pad, output_pad", [(1, 0, 0), (2, 1, 1)])
    def test_gradients(self, seed, stride, pad, output_pad):
        """Input, weight and bias gradients match finite differences."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((1, 2, 4, 4))
        weight = rng.standard_normal((2, 3, 3, 3))
        bias = rng.standard_normal(3)

        _check_gradients(
            lambda x_, w_, b_: F.conv_transpose2d(x_, w_, b_, stride, pad, output_pad),
            F.conv_transpose2d_backward,
            (x, weight, bias),
            rng,
        )

    @pytest.mark.parametrize("seed", range(5))
    def test_adjoint_of_conv(self, seed):
        """<conv(x), y> equals <x, conv_transpose(y)> with the same weights."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((2, 3, 8, 8))
        weight = rng.standard_normal((4, 3, 4, 4))
        y = rng.standard_normal((2, 4, 4, 4))

        forward, _ = F.conv2d(x, weight, None, stride=2, pad=1)
        adjoint, _ = F.conv_transpose2d(y, weight, None, stride=2, pad=1)

        lhs, rhs = np.sum(forward * y), np.sum(x * adjoint)
        assert abs(lhs - rhs) <= 1e-6 * max(abs(lhs), 1.0)


class TestReflectionPad:
    """Tests for reflection_pad2d."""

    def test_row_reflection(self):
        """[1, 2, 3] padded by one becomes [2, 1, 2, 3, 2]."""
        x = np.tile(np.array([1.0, 2.0, 3.0]), (1, 1, 3, 1))
        out, _ = F.reflection_pad2d(x, 1)
        np.testing.assert_array_equal(out[0, 0, 1], [2.0, 1.0, 2.0, 3.0, 2.0])

    def test_shape(self):
        """Padding by three grows 128x128 to 134x134."""
        out, _ = F.reflection_pad2d(np.zeros((1, 1, 128, 128)), 3)
        assert out.shape == (1, 1, 134, 134)

    def test_zero_pad_is_identity(self, rng):
        """Padding by zero returns the input."""
        x = rng.standard_normal((1, 2, 4, 4))
        out, _ = F.reflection_pad2d(x, 0)
        np.testing.assert_array_equal(out, x)

    @pytest.mark.parametrize("pad", [3, 4])
    def test_pad_too_large(self, pad):
        """Padding must be smaller than both spatial dimensions."""
        with pytest.raises(PadError):
            F.reflection_pad2d(np.zeros((1, 1, 3, 8)), pad)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients(self, seed):
        """The scatter-add backward matches finite differences."""
        rng = np.random.default_rng(seed)
        _check_gradients(
            lambda x_: F.reflection_pad2d(x_, 2), F.reflection_pad2d_backward, (rng.standard_normal((1, 2, 4, 5)),), rng
        )


class TestInstanceNorm:
    """Tests for instance_norm."""

    def test_constant_plane(self):
        """A constant plane normalizes to zeros."""
        out, _ = F.instance_norm(np.full((1, 1, 4, 4), 7.3))
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_small_plane(self):
        """The plane [1, 2, 3, 4] gets mean 0 and variance 1."""
        out, _ = F.instance_norm(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 1, 2, 2))
        assert abs(out.mean()) < 1e-12
        assert out.var() == pytest.approx(1.0, abs=1e-4)

    def test_random_planes(self, rng):
        """Every plane of a random input is standardized."""
        out, _ = F.instance_norm(rng.normal(3.0, 2.0, (3, 4, 8, 8)))
        assert np.abs(out.mean(axis=(2, 3))).max() < 1e-6
        assert np.abs(out.var(axis=(2, 3)) - 1.0).max() < 1e-3

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients(self, seed):
        """The backward pass matches finite differences."""
        rng = np.random.default_rng(seed)
        _check_gradients(F.instance_norm, F.instance_norm_backward, (rng.standard_normal((2, 3, 4, 4)),), rng)


class TestActivations:
    """Tests for the pointwise activations."""

    def test_leaky_relu_values(self):
        """Negative inputs are scaled by the slope, positive ones pass through."""
        out, _ = F.leaky_relu(np.array([-1.0, 0.0, 2.5]).reshape(1, 1, 1, 3), 0.2)
        np.testing.assert_allclose(out.ravel(), [-0.2, 0.0, 2.5])

    def test_leaky_relu_gradient_values(self):
        """The derivative is the slope at -2 and one at 3."""
        _, cache = F.leaky_relu(np.array([-2.0, 3.0]).reshape(1, 1, 1, 2), 0.2)
        grad = F.leaky_relu_backward(np.ones((1, 1, 1, 2)), cache)
        np.testing.assert_allclose(grad.ravel(), [0.2, 1.0])

    def test_relu(self):
        """ReLU zeroes negatives."""
        out, _ = F.relu(np.array([-1.0, 1.0]).reshape(1, 1, 1, 2))
        np.testing.assert_array_equal(out.ravel(), [0.0, 1.0])

    def test_tanh01_range(self, rng):
        """The squash maps into [0, 1] and sends zero to one half."""
        out, _ = F.tanh01(rng.normal(0.0, 10.0, (1, 1, 8, 8)))
        assert out.min() >= 0.0
        assert out.max() <= 1.0
        assert F.tanh01(np.zeros((1, 1, 1, 1)))[0].item() == 0.5

    @pytest.mark.parametrize("seed", SEEDS)
    def test_leaky_relu_gradients(self, seed):
        """The backward pass matches finite differences away from the kink."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((1, 2, 3, 3))
        x[np.abs(x) < 1e-2] = 0.5
        _check_gradients(lambda x_: F.leaky_relu(x_, 0.2), F.leaky_relu_backward, (x,), rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_tanh01_gradients(self, seed):
        """The backward pass matches finite differences."""
        rng = np.random.default_rng(seed)
        _check_gradients(F.tanh01, F.tanh01_backward, (rng.standard_normal((1, 2, 3, 3)),), rng)

    def test_debug_finite_check(self, monkeypatch):
        """With the debug switch on, a non-finite output raises."""
        monkeypatch.setenv("TIMBRE_FORGE_DEBUG_FINITE", "1")
        with pytest.raises(NumericalError):
            F.leaky_relu(np.array([np.nan]).reshape(1, 1, 1, 1))
