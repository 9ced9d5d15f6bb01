import random

import factory
from factory import fuzzy
import torch
import torch.nn.functional as F
from torch import nn

from ..boxes import Detection
from ..head import DetectionHead
from ..neck import MscafNeck

DESK_CHANNELS = {"P3": 8, "P4": 8, "P5": 8}
DESK_FUSED = {"N3": 8, "N4": 8, "N5": 8}


class MscafNeckFactory(factory.Factory):
    """Small MSCAF neck over eight-channel levels."""

    class Meta:
        model = MscafNeck

    channels = DESK_CHANNELS
    use_mscaf = True
    use_kan_bottleneck = True
    reduction = 4


class DetectionHeadFactory(factory.Factory):
    """Single-class head over eight-channel levels."""

    class Meta:
        model = DetectionHead

    channels = DESK_FUSED
    num_classes = 1


class DetectionFactory(factory.Factory):
    """Random boxes inside a 100x100 image."""

    class Meta:
        model = Detection

    class Params:
        x = fuzzy.FuzzyFloat(0, 70)
        y = fuzzy.FuzzyFloat(0, 70)
        w = fuzzy.FuzzyFloat(2, 30)
        h = fuzzy.FuzzyFloat(2, 30)

    box = factory.LazyAttribute(lambda o: (o.x, o.y, o.x + o.w, o.y + o.h))
    score = fuzzy.FuzzyFloat(0.01, 0.99)
    class_id = 0
    image_id = "img"


def pyramid(x: torch.Tensor) -> dict:
    """Three levels from one map: the map, and its 2x and 4x average pools."""
    return {"P3": x, "P4": F.avg_pool2d(x, 2), "P5": F.avg_pool2d(x, 4)}


class NeckOnMap(nn.Module):
    """Feeds a pyramid built from a single tensor through the neck."""

    def __init__(self, neck: MscafNeck) -> None:
        super().__init__()
        self.neck = neck

    def forward(self, x):
        return self.neck(pyramid(x))


class HeadOnMap(nn.Module):
    """Feeds a pyramid built from a single tensor through the head."""

    def __init__(self, head: DetectionHead) -> None:
        super().__init__()
        self.head = head

    def forward(self, x):
        levels = pyramid(x)
        return self.head({"N3": levels["P3"], "N4": levels["P4"], "N5": levels["P5"]})


def random_boxes(rng: random.Random, count: int, size: int, min_side: float = 4.0, max_side: float = 150.0):
    """Boxes fully inside a ``size`` x ``size`` image."""
    rows = []
    for _ in range(count):
        w = rng.uniform(min_side, min(max_side, size - 1))
        h = rng.uniform(min_side, min(max_side, size - 1))
        x1 = rng.uniform(0, size - w)
        y1 = rng.uniform(0, size - h)
        rows.append([x1, y1, x1 + w, y1 + h])
    return torch.tensor(rows, dtype=torch.float64).reshape(-1, 4)


def raw_maps(image_size, num_classes=1, seed=0, scale=1.0):
    """Seeded raw head maps for an ``image_size`` square image."""
    generator = torch.Generator().manual_seed(seed)
    return {
        s: scale * torch.randn(1, 5 + num_classes, image_size // s, image_size // s,
                               generator=generator, dtype=torch.float64)
        for s in (8, 16, 32)
    }
