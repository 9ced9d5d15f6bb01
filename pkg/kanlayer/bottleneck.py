"""
kanlayer.bottleneck
~~~~~~~~~~~~~~~~~~~

Bottleneck whose channel mixing nonlinearity is a KAN layer: a 1x1
reduction to half the channels, the KAN layer applied at every spatial
position across the channel vector, a 1x1 expansion back, and an
optional residual connection.
"""

import torch
from torch import nn

from nnkit import Activation, Conv

from .layer import (DEFAULT_BOUND, DEFAULT_DEGREE, DEFAULT_GRID_SIZE,
                    KanDimensionError, KanLayer)


class KanBottleneck(nn.Module):
    """1x1 reduce to half width, a KAN layer on every pixel's channel vector, 1x1 expand.

    Raises:
        KanDimensionError: if ``channels`` is odd or below 2.
    """
    def __init__(
        self,
        channels: int,
        residual: bool = True,
        grid_size: int = DEFAULT_GRID_SIZE,
        degree: int = DEFAULT_DEGREE,
        bound: float = DEFAULT_BOUND,
    ) -> None:
        super().__init__()
        if channels < 2 or channels % 2:
            raise KanDimensionError("an even count >= 2", channels, "bottleneck channels")
        hidden = channels // 2
        self.channels = channels
        self.residual = residual
        self.reduce = Conv(channels, hidden, 1, activation=Activation.IDENTITY)
        self.kan = KanLayer(hidden, hidden, grid_size, degree, bound)
        self.expand = Conv(hidden, channels, 1, activation=Activation.SILU)

    def mix(self, x: torch.Tensor) -> torch.Tensor:
        """Apply the KAN layer to the channel vector of every pixel."""
        return self.kan(x.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Reduce, mix with the KAN layer, expand; add ``x`` when residual."""
        y = self.expand(self.mix(self.reduce(x)))
        return x + y if self.residual else y


def kan_bottleneck_forward(feature: torch.Tensor, block: KanBottleneck) -> torch.Tensor:
    """Shape-preserving KAN bottleneck pass."""
    return block(feature)
