"""
attention.cbam
~~~~~~~~~~~~~~

Convolutional block attention: a channel gate built from global average
and max pooling through one shared two-layer perceptron, then a spatial
gate built from channel-wise mean and max maps through a 7x7
convolution. Channel first, spatial second.
"""

import logging
from dataclasses import dataclass

import torch
from torch import nn

from cployo.errors import DataError, ShapeMismatchError
from nnkit import Activation, ConvSpec, PoolKind, act, conv2d, pool

log = logging.getLogger(__name__)

DEFAULT_REDUCTION = 16
DESK_REDUCTION = 4
SPATIAL_KERNEL = 7


class AttentionParamsError(DataError):
    """Raised when attention parameters are inconsistent."""

    pass


def fit_reduction(channels: int, reduction: int) -> int:
    """Largest ratio <= ``reduction`` that divides ``channels``."""
    for r in range(min(reduction, channels), 0, -1):
        if channels % r == 0:
            return r
    return 1


def _hidden_channels(channels: int, reduction: int) -> int:
    if reduction < 1 or channels % reduction:
        raise AttentionParamsError(
            f"reduction ratio {reduction} must divide the channel count {channels}"
        )
    return channels // reduction


@dataclass
class CbamParams:
    """Weights of one attention block.

    Attributes:
        w1, b1: first MLP layer, C -> C/r.
        w2, b2: second MLP layer, C/r -> C.
        spatial_w, spatial_b: 7x7 convolution from the [mean; max] pair to one map.
    """

    w1: torch.Tensor
    b1: torch.Tensor
    w2: torch.Tensor
    b2: torch.Tensor
    spatial_w: torch.Tensor
    spatial_b: torch.Tensor

    def __post_init__(self) -> None:
        hidden, channels = self.w1.shape
        if hidden < 1 or channels % hidden:
            raise AttentionParamsError(
                f"hidden width {hidden} does not divide the channel count {channels}"
            )
        if tuple(self.w2.shape) != (channels, hidden):
            raise ShapeMismatchError((channels, hidden), tuple(self.w2.shape), "MLP w2")
        if tuple(self.b1.shape) != (hidden,) or tuple(self.b2.shape) != (channels,):
            raise ShapeMismatchError((hidden, channels), (self.b1.numel(), self.b2.numel()), "MLP biases")
        expected = (1, 2, SPATIAL_KERNEL, SPATIAL_KERNEL)
        if tuple(self.spatial_w.shape) != expected:
            raise ShapeMismatchError(expected, tuple(self.spatial_w.shape), "spatial kernel")

    @property
    def channels(self) -> int:
        return self.w1.shape[1]

    @property
    def reduction(self) -> int:
        return self.w1.shape[1] // self.w1.shape[0]


def channel_gate(
    feature: torch.Tensor,
    w1: torch.Tensor,
    b1: torch.Tensor,
    w2: torch.Tensor,
    b2: torch.Tensor,
) -> torch.Tensor:
    """sigmoid(MLP(gap(F)) + MLP(gmp(F))) with shape N x C x 1 x 1."""
    if feature.dim() != 4 or feature.shape[1] != w1.shape[1]:
        raise ShapeMismatchError(("N", w1.shape[1], "H", "W"), tuple(feature.shape), "channel attention input")
    n, c = feature.shape[:2]

    def mlp(v: torch.Tensor) -> torch.Tensor:
        """Shared two-layer MLP: ReLU hidden, linear output."""
        hidden = act(v @ w1.t() + b1, Activation.RELU)
        return hidden @ w2.t() + b2

    avg = pool(feature, PoolKind.GAP).view(n, c)
    peak = pool(feature, PoolKind.GMP).view(n, c)
    return act(mlp(avg) + mlp(peak), Activation.SIGMOID).view(n, c, 1, 1)


def spatial_gate(feature: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """sigmoid(conv7x7([mean_c(F); max_c(F)])) with shape N x 1 x H x W."""
    pooled = torch.cat(
        [feature.mean(dim=1, keepdim=True), feature.amax(dim=1, keepdim=True)], dim=1
    )
    spec = ConvSpec(2, 1, kernel=weight.shape[-1])
    return act(conv2d(pooled, spec, weight, bias), Activation.SIGMOID)


def channel_attention(feature: torch.Tensor, p: CbamParams) -> torch.Tensor:
    """Channel attention weights M_c, each in (0, 1)."""
    return channel_gate(feature, p.w1, p.b1, p.w2, p.b2)


def spatial_attention(feature: torch.Tensor, p: CbamParams) -> torch.Tensor:
    """Spatial attention map M_s, each in (0, 1)."""
    return spatial_gate(feature, p.spatial_w, p.spatial_b)


def cbam(feature: torch.Tensor, p: CbamParams) -> torch.Tensor:
    """F' = M_c(F) * F, then M_s(F') * F'. Shape preserved."""
    refined = channel_attention(feature, p) * feature
    return spatial_attention(refined, p) * refined


class ChannelAttention(nn.Module):
    """Module form of the channel gate; ``forward`` returns the weights M_c."""

    def __init__(self, channels: int, reduction: int = DEFAULT_REDUCTION) -> None:
        super().__init__()
        hidden = _hidden_channels(channels, reduction)
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Channel weights of ``x``, shape N x C x 1 x 1."""
        return channel_gate(x, self.fc1.weight, self.fc1.bias, self.fc2.weight, self.fc2.bias)


class SpatialAttention(nn.Module):
    """Module form of the spatial gate; ``forward`` returns the map M_s."""

    def __init__(self, kernel: int = SPATIAL_KERNEL) -> None:
        super().__init__()
        self.conv = nn.Conv2d(2, 1, kernel, padding=kernel // 2, bias=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Spatial map of ``x``, shape N x 1 x H x W."""
        return spatial_gate(x, self.conv.weight, self.conv.bias)


class CBAM(nn.Module):
    """Channel gate then spatial gate, each applied multiplicatively."""

    def __init__(self, channels: int, reduction: int = DEFAULT_REDUCTION) -> None:
        super().__init__()
        self.channel = ChannelAttention(channels, reduction)
        self.spatial = SpatialAttention()

    @property
    def params(self) -> CbamParams:
        return CbamParams(
            w1=self.channel.fc1.weight,
            b1=self.channel.fc1.bias,
            w2=self.channel.fc2.weight,
            b2=self.channel.fc2.bias,
            spatial_w=self.spatial.conv.weight,
            spatial_b=self.spatial.conv.bias,
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Refine ``x`` with the channel gate, then the spatial gate."""
        refined = self.channel(x) * x
        return self.spatial(refined) * refined
