"""
neckhead.head
~~~~~~~~~~~~~

Decoupled anchor-free prediction head. Each fused level goes through two
3x3 conv layers and a 1x1 projection to ``4 + 1 + K`` logits per cell.
"""

import math
from typing import Dict, Mapping

import torch
from torch import nn

from nnkit import Conv

from .boxes import OBJ_INDEX, CLS_OFFSET
from .neck import OUTPUT_LEVELS

LEVEL_STRIDES = {"N3": 8, "N4": 16, "N5": 32}
OBJECTNESS_PRIOR = 0.01

RawPrediction = Dict[int, torch.Tensor]


class DetectionHead(nn.Module):
    """Two 3x3 convs and a 1x1 prediction per level; each cell predicts box, objectness and class logits."""

    def __init__(self, channels: Mapping[str, int], num_classes: int = 1) -> None:
        super().__init__()
        if num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {num_classes}")
        self.num_classes = num_classes
        self.outputs = CLS_OFFSET + num_classes
        self.stems = nn.ModuleDict()
        self.predict = nn.ModuleDict()
        for level in OUTPUT_LEVELS:
            c = channels[level]
            self.stems[level] = nn.Sequential(Conv(c, c, 3), Conv(c, c, 3))
            self.predict[level] = nn.Conv2d(c, self.outputs, 1)
        self.reset_bias()

    def reset_bias(self) -> None:
        """Start objectness near the prior so early training is not swamped by background."""
        prior = math.log(OBJECTNESS_PRIOR / (1.0 - OBJECTNESS_PRIOR))
        with torch.no_grad():
            for conv in self.predict.values():
                conv.bias.zero_()
                conv.bias[OBJ_INDEX] = prior

    def forward(self, features: Mapping[str, torch.Tensor]) -> RawPrediction:
        """Raw maps keyed by stride."""
        return {
            LEVEL_STRIDES[level]: self.predict[level](self.stems[level](features[level]))
            for level in OUTPUT_LEVELS
        }


def head_forward(features: Mapping[str, torch.Tensor], head: DetectionHead) -> RawPrediction:
    """Raw prediction maps of the three neck levels."""
    return head(features)
