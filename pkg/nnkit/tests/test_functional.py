import math

import numpy as np
import pytest
import torch

from nnkit.exceptions import (ConvSpecError, InsufficientStatisticsError,
                              ShapeMismatchError)
from nnkit.functional import (Activation, ConvSpec, PoolKind, act, batchnorm,
                              conv2d, depthwise_separable, pool)
from nnkit.tests.factory import (ConvSpecFactory, DepthwiseSpecFactory,
                                 random_tensor, random_weight)


def naive_conv2d(x, weight, bias, stride, padding, dilation, groups):
    """Direct cross-correlation written as nested loops."""
    x = x.numpy()
    weight = weight.numpy()
    n, c, h, w = x.shape
    out_ch, in_per_group, k, _ = weight.shape
    padded = np.zeros((n, c, h + 2 * padding, w + 2 * padding))
    padded[:, :, padding : padding + h, padding : padding + w] = x
    oh = (h + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    ow = (w + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    out_per_group = out_ch // groups
    y = np.zeros((n, out_ch, oh, ow))
    for b in range(n):
        for o in range(out_ch):
            g = o // out_per_group
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0 if bias is None else float(bias[o])
                    for ci in range(in_per_group):
                        for u in range(k):
                            for v in range(k):
                                acc += (
                                    weight[o, ci, u, v]
                                    * padded[b, g * in_per_group + ci, i * stride + u * dilation, j * stride + v * dilation]
                                )
                    y[b, o, i, j] = acc
    return torch.from_numpy(y)


class TestConvSpec:
    """Convolution geometry."""

    def test_padding_preserves_size_at_stride_one(self):
        """Test that same padding keeps the size at stride one."""
        spec = ConvSpecFactory(kernel=5, dilation=2)
        assert spec.padding == 4
        assert spec.output_size(9, 11) == (9, 11)

    def test_even_kernel_rejected(self):
        """Test that an even kernel is rejected."""
        with pytest.raises(ConvSpecError):
            ConvSpecFactory(kernel=4)

    def test_groups_must_divide_channels(self):
        """Test that groups must divide both channel counts."""
        with pytest.raises(ConvSpecError):
            ConvSpecFactory(in_ch=3, out_ch=4, groups=2)

    @pytest.mark.parametrize("stride", [1, 2])
    @pytest.mark.parametrize("dilation", [1, 2, 3])
    @pytest.mark.parametrize("kernel", [1, 3, 5])
    @pytest.mark.parametrize("size", [7, 8, 13])
    def test_shape_contract(self, stride, dilation, kernel, size):
        """Test the output size formula."""
        spec = ConvSpecFactory(kernel=kernel, stride=stride, dilation=dilation)
        x = random_tensor(1, spec.in_ch, size, size + 1)
        y = conv2d(x, spec, random_weight(spec))
        assert tuple(y.shape[2:]) == spec.output_size(size, size + 1)
        if stride == 1:
            assert tuple(y.shape[2:]) == (size, size + 1)

    def test_separable_parameter_count(self):
        """Test that the separable pair has fewer parameters than the dense kernel."""
        c, c_out, k = 8, 16, 3
        dw = ConvSpec.depthwise(c, k)
        pw = ConvSpec.pointwise(c, c_out)
        assert dw.param_count(bias=False) + pw.param_count(bias=False) == c * k * k + c * c_out
        assert c * k * k + c * c_out < ConvSpec(c, c_out, k).param_count(bias=False)


class TestConv2d:
    """Cross-correlation against the loop oracle."""

    def test_identity_kernel(self):
        """Test that a delta kernel returns the input."""
        spec = ConvSpecFactory(in_ch=3, out_ch=3, kernel=1)
        x = random_tensor(2, 3, 5, 5)
        weight = torch.eye(3, dtype=torch.float64).view(3, 3, 1, 1)
        assert torch.equal(conv2d(x, spec, weight), x)

    def test_zero_kernel(self):
        """Test that a zero kernel returns the bias."""
        spec = ConvSpecFactory()
        x = random_tensor(1, 3, 5, 5)
        y = conv2d(x, spec, torch.zeros(spec.weight_shape, dtype=torch.float64),
                   torch.zeros(spec.out_ch, dtype=torch.float64))
        assert not y.any()

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_loop_oracle(self, seed):
        """Test against the loop oracle."""
        spec = ConvSpecFactory()
        x = random_tensor(1, 3, 5, 5, seed=seed)
        weight = random_weight(spec, seed=seed + 10)
        bias = random_tensor(spec.out_ch, seed=seed + 20)
        expected = naive_conv2d(x, weight, bias, spec.stride, spec.padding, spec.dilation, spec.groups)
        assert torch.allclose(conv2d(x, spec, weight, bias), expected, atol=1e-12)

    @pytest.mark.parametrize("stride,dilation", [(2, 1), (1, 2), (2, 3)])
    def test_strided_dilated_grouped_matches_oracle(self, stride, dilation):
        """Test strided, dilated and grouped cases against the oracle."""
        spec = ConvSpecFactory(in_ch=4, out_ch=6, groups=2, stride=stride, dilation=dilation)
        x = random_tensor(2, 4, 9, 9, seed=stride)
        weight = random_weight(spec, seed=dilation)
        expected = naive_conv2d(x, weight, None, stride, spec.padding, dilation, 2)
        assert torch.allclose(conv2d(x, spec, weight), expected, atol=1e-12)

    def test_linear_in_input(self):
        """Test linearity in the input."""
        spec = ConvSpecFactory()
        weight = random_weight(spec, seed=1)
        x, y = random_tensor(2, 3, 6, 6, seed=2), random_tensor(2, 3, 6, 6, seed=3)
        a, b = 1.7, -0.3
        lhs = conv2d(a * x + b * y, spec, weight)
        rhs = a * conv2d(x, spec, weight) + b * conv2d(y, spec, weight)
        assert torch.max(torch.abs(lhs - rhs)).item() < 1e-10

    def test_channel_mismatch(self):
        """Test that an input of the wrong width is rejected."""
        spec = ConvSpecFactory(in_ch=3)
        with pytest.raises(ShapeMismatchError):
            conv2d(random_tensor(1, 2, 5, 5), spec, random_weight(spec))

    def test_weight_mismatch(self):
        """Test that a weight of the wrong shape is rejected."""
        spec = ConvSpecFactory()
        with pytest.raises(ShapeMismatchError):
            conv2d(random_tensor(1, 3, 5, 5), spec, random_tensor(4, 3, 1, 1))


class TestDepthwiseSeparable:
    """Depthwise then pointwise convolution."""

    def test_identity_stages(self):
        """Test that identity stages return the input."""
        dw = DepthwiseSpecFactory(in_ch=4)
        pw = ConvSpec.pointwise(4, 4)
        x = random_tensor(1, 4, 6, 6)
        dw_weight = torch.zeros(dw.weight_shape, dtype=torch.float64)
        dw_weight[:, 0, 1, 1] = 1.0
        pw_weight = torch.eye(4, dtype=torch.float64).view(4, 4, 1, 1)
        assert torch.allclose(depthwise_separable(x, dw, pw, dw_weight, pw_weight), x)

    def test_matches_composed_oracle(self):
        """Test against the two stages composed by hand."""
        dw = DepthwiseSpecFactory(in_ch=3, kernel=3)
        pw = ConvSpec.pointwise(3, 5)
        x = random_tensor(1, 3, 6, 6, seed=4)
        dw_weight, pw_weight = random_weight(dw, seed=5), random_weight(pw, seed=6)
        inner = naive_conv2d(x, dw_weight, None, 1, 1, 1, 3)
        expected = naive_conv2d(inner, pw_weight, None, 1, 0, 1, 1)
        assert torch.allclose(depthwise_separable(x, dw, pw, dw_weight, pw_weight), expected, atol=1e-12)

    def test_rejects_dense_first_stage(self):
        """Test that a dense first stage is rejected."""
        with pytest.raises(ConvSpecError):
            depthwise_separable(random_tensor(1, 3, 5, 5), ConvSpecFactory(in_ch=3, out_ch=3),
                                ConvSpec.pointwise(3, 3), random_tensor(3, 3, 3, 3), random_tensor(3, 3, 1, 1))


@pytest.fixture
def bn_state():
    c = 3
    return {
        "weight": torch.ones(c, dtype=torch.float64),
        "bias": torch.zeros(c, dtype=torch.float64),
        "running_mean": torch.zeros(c, dtype=torch.float64),
        "running_var": torch.ones(c, dtype=torch.float64),
    }


class TestBatchNorm:
    """Batch normalization in both modes."""

    def test_eval_identity(self, bn_state):
        """Test that unit statistics in eval mode give the identity."""
        x = random_tensor(2, 3, 4, 4)
        y = batchnorm(x, training=False, **bn_state)
        assert torch.allclose(y, x / math.sqrt(1 + 1e-5), atol=0)
        assert torch.max(torch.abs(y - x)).item() < 1e-4

    def test_train_statistics(self, bn_state):
        """Test that train mode normalises with batch statistics."""
        x = 3.0 * random_tensor(4, 3, 5, 5, seed=1) + 2.0
        y = batchnorm(x, training=True, **bn_state)
        mean = y.mean(dim=(0, 2, 3))
        var = ((y - mean.view(1, -1, 1, 1)) ** 2).mean(dim=(0, 2, 3))
        assert torch.all(torch.abs(mean) < 1e-6)
        assert torch.all(torch.abs(var - 1) < 1e-5)

    def test_running_stats_updated_with_momentum(self, bn_state):
        """Test the momentum update of the running statistics."""
        x = random_tensor(4, 3, 5, 5, seed=2) + 1.0
        batchnorm(x, training=True, **bn_state)
        expected = 0.1 * x.mean(dim=(0, 2, 3))
        assert torch.allclose(bn_state["running_mean"], expected)

    def test_matches_direct_formula(self, bn_state):
        """Test against the closed form."""
        x = random_tensor(2, 3, 4, 4, seed=3)
        gamma = random_tensor(3, seed=4)
        beta = random_tensor(3, seed=5)
        mu = random_tensor(3, seed=6)
        var = random_tensor(3, seed=7).abs() + 0.5
        y = batchnorm(x, gamma, beta, mu.clone(), var.clone(), training=False)
        for c in range(3):
            expected = gamma[c] * (x[:, c] - mu[c]) / torch.sqrt(var[c] + 1e-5) + beta[c]
            assert torch.allclose(y[:, c], expected, atol=1e-12)

    def test_single_value_per_channel_rejected(self, bn_state):
        """Test that one value per channel is rejected in train mode."""
        with pytest.raises(InsufficientStatisticsError, match="insufficient statistics"):
            batchnorm(random_tensor(1, 3, 1, 1), training=True, **bn_state)

    def test_single_value_allowed_in_eval(self, bn_state):
        """Test that one value per channel is fine in eval mode."""
        y = batchnorm(random_tensor(1, 3, 1, 1), training=False, **bn_state)
        assert y.shape == (1, 3, 1, 1)


class TestActivations:
    """Pointwise activations."""

    def test_fixed_points(self):
        """Test the value at zero of each activation."""
        zero = torch.zeros(1, dtype=torch.float64)
        assert act(zero, Activation.SIGMOID).item() == 0.5
        assert act(zero, Activation.SILU).item() == 0.0
        assert act(zero, "relu").item() == 0.0

    def test_matches_scalar_reference(self):
        """Test against scalar reference formulas."""
        points = random_tensor(1000, seed=8) * 4
        sig = act(points, Activation.SIGMOID)
        silu = act(points, Activation.SILU)
        relu = act(points, Activation.RELU)
        for i, v in enumerate(points.tolist()):
            s = 1.0 / (1.0 + math.exp(-v))
            assert abs(sig[i].item() - s) < 1e-12
            assert abs(silu[i].item() - v * s) < 1e-12
            assert relu[i].item() == max(v, 0.0)


class TestPool:
    """Global pooling."""

    def test_gap_of_constant(self):
        """Test that average pooling of a constant is the constant."""
        x = torch.full((2, 3, 4, 4), 2.5, dtype=torch.float64)
        assert torch.all(pool(x, PoolKind.GAP) == 2.5)

    def test_gmp_dominates_gap(self):
        """Test that max pooling is never below average pooling."""
        x = random_tensor(2, 3, 5, 5, seed=9)
        assert torch.all(pool(x, PoolKind.GMP) >= pool(x, PoolKind.GAP))

    def test_matches_loop_oracle(self):
        """Test against a loop oracle."""
        x = random_tensor(2, 3, 6, 6, seed=10)
        gap, gmp, mp = pool(x, "gap"), pool(x, "gmp"), pool(x, "max2d", 2)
        for n in range(2):
            for c in range(3):
                values = x[n, c].flatten().tolist()
                assert abs(gap[n, c, 0, 0].item() - sum(values) / len(values)) < 1e-12
                assert gmp[n, c, 0, 0].item() == max(values)
                for i in range(3):
                    for j in range(3):
                        window = x[n, c, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                        assert mp[n, c, i, j].item() == window.max().item()
