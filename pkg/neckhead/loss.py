"""
neckhead.loss
~~~~~~~~~~~~~

CIoU box loss and the combined detection loss.

By default the CIoU aspect weight ``alpha`` and the IoU-aware objectness
target are detached from the graph. ``exact_gradients=True`` keeps both
attached so the loss is a plain differentiable function, which is what
the gradient checker needs.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field

from .assign import Targets
from .boxes import decode_boxes, split_map

EPS = 1e-9


class LossWeights(BaseModel):
    """Weights of the box, objectness and class terms."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    box: float = Field(7.5, ge=0.0)
    obj: float = Field(1.0, ge=0.0)
    cls: float = Field(0.5, ge=0.0)


@dataclass
class LossBreakdown:
    """Total loss and its weighted parts."""

    total: torch.Tensor
    box: torch.Tensor
    obj: torch.Tensor
    cls: torch.Tensor
    num_positive: int

    def to_dict(self) -> Dict[str, Any]:
        """Loss parts as floats."""
        return {
            "total": float(self.total.detach()),
            "box": float(self.box.detach()),
            "obj": float(self.obj.detach()),
            "cls": float(self.cls.detach()),
            "num_positive": self.num_positive,
        }


def _pairwise_iou(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    iw = (torch.minimum(pred[:, 2], target[:, 2]) - torch.maximum(pred[:, 0], target[:, 0])).clamp(min=0)
    ih = (torch.minimum(pred[:, 3], target[:, 3]) - torch.maximum(pred[:, 1], target[:, 1])).clamp(min=0)
    inter = iw * ih
    area_p = (pred[:, 2] - pred[:, 0]) * (pred[:, 3] - pred[:, 1])
    area_t = (target[:, 2] - target[:, 0]) * (target[:, 3] - target[:, 1])
    return inter / (area_p + area_t - inter).clamp(min=EPS)


def ciou_loss(pred: torch.Tensor, target: torch.Tensor, exact_gradients: bool = False) -> torch.Tensor:
    """Per-pair CIoU loss of (n, 4) xyxy boxes: ``1 - IoU + rho^2 / c^2 + alpha * v``."""
    iou = _pairwise_iou(pred, target)

    pw, ph = pred[:, 2] - pred[:, 0], pred[:, 3] - pred[:, 1]
    tw, th = target[:, 2] - target[:, 0], target[:, 3] - target[:, 1]
    rho2 = ((pred[:, 0] + pred[:, 2] - target[:, 0] - target[:, 2]) ** 2
            + (pred[:, 1] + pred[:, 3] - target[:, 1] - target[:, 3]) ** 2) / 4.0
    cw = torch.maximum(pred[:, 2], target[:, 2]) - torch.minimum(pred[:, 0], target[:, 0])
    ch = torch.maximum(pred[:, 3], target[:, 3]) - torch.minimum(pred[:, 1], target[:, 1])
    c2 = (cw ** 2 + ch ** 2).clamp(min=EPS)

    v = (4.0 / math.pi ** 2) * (torch.atan(tw / th.clamp(min=EPS)) - torch.atan(pw / ph.clamp(min=EPS))) ** 2
    alpha = v / (1.0 - iou + v).clamp(min=EPS)
    if not exact_gradients:
        alpha = alpha.detach()
    return 1.0 - iou + rho2 / c2 + alpha * v


def detection_loss(
    raw: Mapping[int, torch.Tensor],
    targets: Targets,
    weights: LossWeights = LossWeights(),
    exact_gradients: bool = False,
    iou_aware: bool = True,
) -> LossBreakdown:
    """Weighted sum of box, objectness and class terms.

    The box term is the mean CIoU over positive cells, the objectness term
    the mean BCE over every cell of every scale, the class term the mean
    BCE over the classes of positive cells. Without positives the box and
    class terms are zero. With ``iou_aware`` a positive cell's objectness
    target is the IoU of its predicted box with its target, not 1.
    """
    pred_boxes, target_boxes, cls_logits, cls_targets = [], [], [], []
    obj_loss_sum = None
    cells = 0
    for stride in sorted(raw):
        raw_map = raw[stride]
        t = targets[stride]
        _, obj, cls = split_map(raw_map)
        boxes = decode_boxes(raw_map, stride)
        pos = t.positive.reshape(obj.shape)

        pos_pred = boxes[pos]
        pos_target = t.boxes.reshape(*obj.shape, 4)[pos].to(raw_map.dtype)
        obj_target = torch.zeros_like(obj)
        if pos.any():
            if iou_aware:
                quality = _pairwise_iou(pos_pred, pos_target)
                if not exact_gradients:
                    quality = quality.detach()
                obj_target = obj_target.masked_scatter(pos, quality.clamp(0.0, 1.0))
            else:
                obj_target = obj_target.masked_fill(pos, 1.0)
            pred_boxes.append(pos_pred)
            target_boxes.append(pos_target)
            cls_logits.append(cls[pos])
            labels = t.classes.reshape(obj.shape)[pos]
            cls_targets.append(F.one_hot(labels, cls.shape[-1]).to(raw_map.dtype))

        term = F.binary_cross_entropy_with_logits(obj, obj_target, reduction="sum")
        obj_loss_sum = term if obj_loss_sum is None else obj_loss_sum + term
        cells += obj.numel()

    obj_loss = obj_loss_sum / cells
    zero = obj_loss.new_zeros(())
    if pred_boxes:
        box_loss = ciou_loss(torch.cat(pred_boxes), torch.cat(target_boxes), exact_gradients).mean()
        cls_loss = F.binary_cross_entropy_with_logits(torch.cat(cls_logits), torch.cat(cls_targets))
        num_positive = sum(len(p) for p in pred_boxes)
    else:
        box_loss, cls_loss, num_positive = zero, zero, 0

    total = weights.box * box_loss + weights.obj * obj_loss + weights.cls * cls_loss
    return LossBreakdown(total, box_loss, obj_loss, cls_loss, num_positive)
