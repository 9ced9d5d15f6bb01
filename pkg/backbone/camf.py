"""
backbone.camf
~~~~~~~~~~~~~

Contextual attention with multi-scale feature fusion: parallel depthwise
convolutions of growing kernel size capture local and wider context,
then a channel gate and a spatial gate merge channel and spatial
information before a 1x1 mixing convolution.
"""

from typing import Sequence

import torch
from torch import nn

from attention import ChannelAttention, SpatialAttention, fit_reduction
from attention.cbam import DESK_REDUCTION
from nnkit import Activation, Conv, ConvSpec, conv2d

MSC_KERNELS = (3, 5, 7)


class MultiScaleContext(nn.Module):
    """Parallel depthwise convolutions of kernels 3, 5 and 7 summed and mixed by a 1x1 conv."""

    def __init__(self, channels: int, kernels: Sequence[int] = MSC_KERNELS) -> None:
        super().__init__()
        self.channels = channels
        self.kernels = tuple(kernels)
        self.branches = nn.ModuleList(
            nn.Conv2d(channels, channels, k, padding=k // 2, groups=channels, bias=False)
            for k in self.kernels
        )
        self.mixer = Conv(channels, channels, 1)

    def branch_sum(self, x: torch.Tensor) -> torch.Tensor:
        """Sum of the depthwise branch outputs, before the mixer."""
        out = 0
        for k, branch in zip(self.kernels, self.branches):
            out = out + conv2d(x, ConvSpec.depthwise(self.channels, k), branch.weight)
        return out

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Context of ``x`` at every kernel size, mixed back to ``channels``."""
        return self.mixer(self.branch_sum(x))


def multiscale_context(x: torch.Tensor, block: MultiScaleContext) -> torch.Tensor:
    """Run the multi-scale context block on ``x``."""
    return block(x)


class ContextFusion(nn.Module):
    """Channel gate, spatial gate, then a linear 1x1 conv + BN mixer."""

    def __init__(self, channels: int, reduction: int = DESK_REDUCTION) -> None:
        super().__init__()
        self.channel = ChannelAttention(channels, fit_reduction(channels, reduction))
        self.spatial = SpatialAttention()
        self.mixer = Conv(channels, channels, 1, activation=Activation.IDENTITY)

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        """Channel gate then spatial gate, before the mixer."""
        y = self.channel(x) * x
        return self.spatial(y) * y

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Re-weight the context features, then mix them."""
        return self.mixer(self.gate(x))


def context_fusion(x: torch.Tensor, block: ContextFusion) -> torch.Tensor:
    """Run the context fusion block on ``x``."""
    return block(x)
