"""
neckhead.assign
~~~~~~~~~~~~~~~

Ground-truth to cell assignment.

A box goes to one scale chosen by its size ``sqrt(w * h)``: stride 8 below
64 px, stride 16 below 128 px, stride 32 above, with both boundaries
scaled up for images larger than 640 px. Inside that scale the cell
holding the box center and its 3x3 neighborhood become positives. A cell
claimed by several boxes keeps the one whose center is nearest to the
cell center, the lower index on a tie.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import torch

from cployo.errors import DataError

log = logging.getLogger(__name__)

SMALL_BOUNDARY = 64.0
LARGE_BOUNDARY = 128.0
REFERENCE_SIZE = 640.0


class GroundTruthOutOfBoundsError(DataError):
    """Raised when a ground-truth box is empty or leaves the image."""

    def __init__(self, box: Sequence[float], image_size: Tuple[int, int]) -> None:
        self.box = tuple(float(v) for v in box)
        super().__init__(f"ground-truth box {self.box} is empty or outside a {image_size} image")


@dataclass
class ScaleTargets:
    """Per-cell targets of one scale.

    Attributes:
        positive: (N, H, W) bool mask of positive cells.
        boxes: (N, H, W, 4) xyxy target boxes, zero on negatives.
        classes: (N, H, W) target class ids, -1 on negatives.
        owner: (N, H, W) index of the assigned ground-truth box, -1 on negatives.
    """

    positive: torch.Tensor
    boxes: torch.Tensor
    classes: torch.Tensor
    owner: torch.Tensor

    @property
    def num_positive(self) -> int:
        return int(self.positive.sum())


Targets = Dict[int, ScaleTargets]


def scale_for(box: Sequence[float], image_size: Tuple[int, int], strides: Sequence[int]) -> int:
    """Stride responsible for a box of the given size."""
    factor = max(1.0, max(image_size) / REFERENCE_SIZE)
    side = ((box[2] - box[0]) * (box[3] - box[1])) ** 0.5
    ordered = sorted(strides)
    if side < SMALL_BOUNDARY * factor:
        return ordered[0]
    if side < LARGE_BOUNDARY * factor or len(ordered) < 3:
        return ordered[min(1, len(ordered) - 1)]
    return ordered[2]


def _check_box(box: Sequence[float], image_size: Tuple[int, int]) -> None:
    height, width = image_size
    x1, y1, x2, y2 = box
    if not (0.0 <= x1 < x2 <= width and 0.0 <= y1 < y2 <= height):
        raise GroundTruthOutOfBoundsError(box, image_size)


def assign_targets(
    gt_boxes: Sequence[torch.Tensor],
    shapes: Mapping[int, Tuple[int, int]],
    image_size: Tuple[int, int],
    gt_classes: Optional[Sequence[torch.Tensor]] = None,
    dtype: torch.dtype = torch.float32,
) -> Targets:
    """Build per-cell targets for a batch.

    Args:
        gt_boxes: one (n_i, 4) xyxy tensor per image.
        shapes: stride -> (H, W) of its prediction map.
        image_size: (height, width) of the input images.
        gt_classes: one (n_i,) class tensor per image; class 0 when omitted.

    Raises:
        GroundTruthOutOfBoundsError: for an empty box or one leaving the image.
    """
    n = len(gt_boxes)
    targets: Targets = {}
    for stride, (h, w) in shapes.items():
        targets[stride] = ScaleTargets(
            positive=torch.zeros(n, h, w, dtype=torch.bool),
            boxes=torch.zeros(n, h, w, 4, dtype=dtype),
            classes=torch.full((n, h, w), -1, dtype=torch.long),
            owner=torch.full((n, h, w), -1, dtype=torch.long),
        )

    for b, boxes in enumerate(gt_boxes):
        rows = boxes.tolist()
        labels = gt_classes[b].tolist() if gt_classes is not None else [0] * len(rows)
        best: Dict[Tuple[int, int, int], Tuple[float, int]] = {}
        for k, box in enumerate(rows):
            _check_box(box, image_size)
            stride = scale_for(box, image_size, list(shapes))
            h, w = shapes[stride]
            cx, cy = (box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0
            ci = min(int(cy // stride), h - 1)
            cj = min(int(cx // stride), w - 1)
            for i in range(ci - 1, ci + 2):
                for j in range(cj - 1, cj + 2):
                    if not (0 <= i < h and 0 <= j < w):
                        continue
                    dist = (cx - (j + 0.5) * stride) ** 2 + (cy - (i + 0.5) * stride) ** 2
                    key = (stride, i, j)
                    if key not in best or dist < best[key][0]:
                        best[key] = (dist, k)

        for (stride, i, j), (_, k) in best.items():
            t = targets[stride]
            t.positive[b, i, j] = True
            t.boxes[b, i, j] = torch.tensor(rows[k], dtype=dtype)
            t.classes[b, i, j] = int(labels[k])
            t.owner[b, i, j] = k

    log.debug(
        "assigned %s positives", {s: t.num_positive for s, t in targets.items()}
    )
    return targets
