"""
attention
~~~~~~~~~

Channel and spatial attention gates (CBAM) and the pixel-wise spatial
attention gate used at the end of the backbone.
"""

from .cbam import (CBAM, DEFAULT_REDUCTION, DESK_REDUCTION,
                   AttentionParamsError, CbamParams, ChannelAttention,
                   SpatialAttention, cbam, channel_attention, channel_gate,
                   fit_reduction, spatial_attention, spatial_gate)
from .psa import PixelSpatialAttention, psa

__all__ = [
    "AttentionParamsError",
    "CBAM",
    "CbamParams",
    "ChannelAttention",
    "DEFAULT_REDUCTION",
    "DESK_REDUCTION",
    "PixelSpatialAttention",
    "SpatialAttention",
    "cbam",
    "channel_attention",
    "channel_gate",
    "fit_reduction",
    "psa",
    "spatial_attention",
    "spatial_gate",
]
