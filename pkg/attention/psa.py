"""
attention.psa
~~~~~~~~~~~~~

Pixel-wise spatial attention: every pixel of the feature map is scaled
by a sigmoid gate computed from its own channel vector through a 1x1
convolution to a single channel.
"""

import torch
from torch import nn

from nnkit import Activation, ConvSpec, act, conv2d


def psa(feature: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """F * sigmoid(conv1x1(F)), the gate broadcast over channels."""
    spec = ConvSpec.pointwise(feature.shape[1], 1)
    return feature * act(conv2d(feature, spec, weight, bias), Activation.SIGMOID)


class PixelSpatialAttention(nn.Module):
    """Module form of :func:`psa` with a learned 1x1 gate."""

    def __init__(self, channels: int) -> None:
        super().__init__()
        self.gate = nn.Conv2d(channels, 1, 1, bias=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Gate every pixel of ``x`` by its own channel vector."""
        return psa(x, self.gate.weight, self.gate.bias)
