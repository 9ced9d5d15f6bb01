"""
nnkit.functional
~~~~~~~~~~~~~~~~

Stateless operations every block is built from: convolution described by
a :class:`ConvSpec`, depthwise-separable convolution, batch
normalization, activations and pooling.

Convolution is cross-correlation with zero padding
``dilation * (kernel - 1) // 2``, which preserves the spatial size at
stride 1.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import torch
import torch.nn.functional as F

from .exceptions import (ConvSpecError, InsufficientStatisticsError,
                         ShapeMismatchError)

log = logging.getLogger(__name__)

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class Activation(str, Enum):
    """Activations supported by :func:`act`."""

    SILU = "silu"
    SIGMOID = "sigmoid"
    RELU = "relu"
    IDENTITY = "identity"


class PoolKind(str, Enum):
    """Pooling kinds supported by :func:`pool`."""

    GAP = "gap"
    GMP = "gmp"
    MAX2D = "max2d"


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 2-D convolution.

    ``groups == in_ch == out_ch`` describes a depthwise convolution.
    """

    in_ch: int
    out_ch: int
    kernel: int = 3
    stride: int = 1
    dilation: int = 1
    groups: int = 1
    has_bn: bool = False

    def __post_init__(self) -> None:
        if self.in_ch < 1 or self.out_ch < 1:
            raise ConvSpecError(f"channel counts must be positive: {self}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConvSpecError(f"kernel must be a positive odd integer, got {self.kernel}")
        if self.stride < 1 or self.dilation < 1 or self.groups < 1:
            raise ConvSpecError(f"stride, dilation and groups must be >= 1: {self}")
        if self.in_ch % self.groups or self.out_ch % self.groups:
            raise ConvSpecError(
                f"in_ch={self.in_ch} and out_ch={self.out_ch} must be divisible by groups={self.groups}"
            )

    @classmethod
    def depthwise(cls, channels: int, kernel: int = 3, stride: int = 1, dilation: int = 1,
                  has_bn: bool = False) -> "ConvSpec":
        """Spec of a depthwise convolution over ``channels``."""
        return cls(channels, channels, kernel, stride, dilation, groups=channels, has_bn=has_bn)

    @classmethod
    def pointwise(cls, in_ch: int, out_ch: int, has_bn: bool = False) -> "ConvSpec":
        """Spec of a 1x1 convolution."""
        return cls(in_ch, out_ch, kernel=1, has_bn=has_bn)

    @property
    def padding(self) -> int:
        return self.dilation * (self.kernel - 1) // 2

    @property
    def is_depthwise(self) -> bool:
        return self.groups == self.in_ch == self.out_ch and self.groups > 1

    @property
    def weight_shape(self) -> Tuple[int, int, int, int]:
        return (self.out_ch, self.in_ch // self.groups, self.kernel, self.kernel)

    def output_size(self, height: int, width: int) -> Tuple[int, int]:
        """floor((H + 2p - d(k-1) - 1) / s) + 1 per spatial axis."""
        reach = self.dilation * (self.kernel - 1)
        return (
            (height + 2 * self.padding - reach - 1) // self.stride + 1,
            (width + 2 * self.padding - reach - 1) // self.stride + 1,
        )

    def param_count(self, bias: Optional[bool] = None) -> int:
        """Learnable parameters: weights, plus a bias without BN or BN's gamma and beta."""
        if bias is None:
            bias = not self.has_bn
        out_ch, in_per_group, k, _ = self.weight_shape
        count = out_ch * in_per_group * k * k
        if bias:
            count += out_ch
        if self.has_bn:
            count += 2 * out_ch
        return count


def _check_input(x: torch.Tensor, channels: int, what: str) -> None:
    if x.dim() != 4:
        raise ShapeMismatchError("N x C x H x W", tuple(x.shape), what)
    if x.shape[1] != channels:
        raise ShapeMismatchError((x.shape[0], channels, *x.shape[2:]), tuple(x.shape), what)


def conv2d(
    x: torch.Tensor,
    spec: ConvSpec,
    weight: torch.Tensor,
    bias: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Cross-correlate ``x`` with ``weight`` as described by ``spec``.

    Raises:
        ShapeMismatchError: if ``x``, ``weight`` or ``bias`` disagree with ``spec``.
    """
    _check_input(x, spec.in_ch, "conv2d input")
    if tuple(weight.shape) != spec.weight_shape:
        raise ShapeMismatchError(spec.weight_shape, tuple(weight.shape), "conv2d weight")
    if bias is not None and tuple(bias.shape) != (spec.out_ch,):
        raise ShapeMismatchError((spec.out_ch,), tuple(bias.shape), "conv2d bias")
    return F.conv2d(
        x,
        weight,
        bias,
        stride=spec.stride,
        padding=spec.padding,
        dilation=spec.dilation,
        groups=spec.groups,
    )


def depthwise_separable(
    x: torch.Tensor,
    spec_dw: ConvSpec,
    spec_pw: ConvSpec,
    dw_weight: torch.Tensor,
    pw_weight: torch.Tensor,
    dw_bias: Optional[torch.Tensor] = None,
    pw_bias: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Depthwise convolution (groups = in_ch) followed by a pointwise 1x1 convolution."""
    if spec_dw.groups != spec_dw.in_ch or spec_dw.out_ch != spec_dw.in_ch:
        raise ConvSpecError(f"depthwise stage must have groups == in_ch == out_ch: {spec_dw}")
    if spec_pw.kernel != 1 or spec_pw.groups != 1:
        raise ConvSpecError(f"pointwise stage must be a dense 1x1 convolution: {spec_pw}")
    if spec_pw.in_ch != spec_dw.out_ch:
        raise ShapeMismatchError((spec_dw.out_ch,), (spec_pw.in_ch,), "pointwise in_ch")
    return conv2d(conv2d(x, spec_dw, dw_weight, dw_bias), spec_pw, pw_weight, pw_bias)


def batchnorm(
    x: torch.Tensor,
    weight: Optional[torch.Tensor],
    bias: Optional[torch.Tensor],
    running_mean: Optional[torch.Tensor],
    running_var: Optional[torch.Tensor],
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> torch.Tensor:
    """Per-channel batch normalization.

    Train mode normalizes with the batch statistics and moves the running
    statistics by ``momentum``; eval mode normalizes with the running
    statistics.

    Raises:
        InsufficientStatisticsError: in train mode when N*H*W == 1.
    """
    if x.dim() != 4:
        raise ShapeMismatchError("N x C x H x W", tuple(x.shape), "batchnorm input")
    n, _, h, w = x.shape
    if training and n * h * w == 1:
        raise InsufficientStatisticsError(n, h, w)
    return F.batch_norm(x, running_mean, running_var, weight, bias, training, momentum, eps)


def act(x: torch.Tensor, kind: Activation) -> torch.Tensor:
    """Elementwise activation."""
    kind = Activation(kind)
    if kind is Activation.SILU:
        return F.silu(x)
    if kind is Activation.SIGMOID:
        return torch.sigmoid(x)
    if kind is Activation.RELU:
        return F.relu(x)
    return x


def pool(x: torch.Tensor, kind: PoolKind, window: int = 2) -> torch.Tensor:
    """Global average, global max, or windowed max pooling (stride = window)."""
    kind = PoolKind(kind)
    if kind is PoolKind.GAP:
        return x.mean(dim=(2, 3), keepdim=True)
    if kind is PoolKind.GMP:
        return x.amax(dim=(2, 3), keepdim=True)
    return F.max_pool2d(x, kernel_size=window, stride=window)
