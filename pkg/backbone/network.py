"""
backbone.network
~~~~~~~~~~~~~~~~

The feature extractor: a stride-2 stem, four stride-2 stages each
followed by a C2f block, and pixel-wise spatial attention after the last
stage. It emits three pyramid levels at strides 8, 16 and 32.
"""

import logging
from typing import Dict

import torch
from torch import nn

from attention import PixelSpatialAttention
from attention.cbam import DESK_REDUCTION
from cployo.errors import DataError, ShapeMismatchError
from nnkit import Conv

from .c2f import C2f, C2fRepViTCAMF

log = logging.getLogger(__name__)

BASE_WIDTHS = (64, 128, 256, 512, 1024)
BASE_DEPTHS = (1, 2, 2, 1)
MAX_STRIDE = 32
PYRAMID_LEVELS = ("P3", "P4", "P5")


class BackboneInputError(DataError):
    """Raised when the input size is not a multiple of the backbone's total stride."""

    def __init__(self, height: int, width: int) -> None:
        super().__init__(
            f"input size {height}x{width} is not divisible by {MAX_STRIDE}"
        )


def scale_width(channels: int, width_mult: float, divisor: int = 8) -> int:
    """Scale a channel count and round it to a multiple of ``divisor``."""
    return max(divisor, int(channels * width_mult + divisor / 2) // divisor * divisor)


def scale_depth(depth: int, depth_mult: float) -> int:
    """Scale a stage depth, keeping at least one block."""
    return max(1, round(depth * depth_mult))


class Backbone(nn.Module):
    """Stem and four downsampling stages emitting the P3, P4 and P5 maps."""

    def __init__(
        self,
        in_ch: int = 1,
        width_mult: float = 0.25,
        depth_mult: float = 1.0,
        use_c2f_repvitcamf: bool = True,
        reduction: int = DESK_REDUCTION,
    ) -> None:
        super().__init__()
        self.in_ch = in_ch
        widths = [scale_width(c, width_mult) for c in BASE_WIDTHS]
        depths = [scale_depth(d, depth_mult) for d in BASE_DEPTHS]
        self.widths = widths
        self.depths = depths

        self.stem = Conv(in_ch, widths[0], 3, stride=2)
        self.stages = nn.ModuleList()
        for i, n in enumerate(depths):
            c_in, c_out = widths[i], widths[i + 1]
            if use_c2f_repvitcamf:
                block = C2fRepViTCAMF(c_out, c_out, n, reduction=reduction)
            else:
                block = C2f(c_out, c_out, n)
            self.stages.append(nn.Sequential(Conv(c_in, c_out, 3, stride=2), block))
        self.psa = PixelSpatialAttention(widths[-1])
        log.debug("Backbone widths=%s depths=%s", widths, depths)

    @property
    def out_channels(self) -> Dict[str, int]:
        return dict(zip(PYRAMID_LEVELS, self.widths[2:]))

    def forward(self, x: torch.Tensor) -> Dict[str, torch.Tensor]:
        """Return ``{"P3", "P4", "P5"}`` feature maps at strides 8, 16 and 32."""
        if x.dim() != 4 or x.shape[1] != self.in_ch:
            raise ShapeMismatchError(("N", self.in_ch, "H", "W"), tuple(x.shape), "backbone input")
        h, w = x.shape[2:]
        if h % MAX_STRIDE or w % MAX_STRIDE:
            raise BackboneInputError(h, w)

        y = self.stem(x)
        features = []
        for stage in self.stages:
            y = stage(y)
            features.append(y)
        p3, p4, p5 = features[1], features[2], self.psa(features[3])
        return {"P3": p3, "P4": p4, "P5": p5}


def backbone_forward(images: torch.Tensor, backbone: Backbone) -> Dict[str, torch.Tensor]:
    """Run the backbone on an N x 1 x H x W batch."""
    return backbone(images)
