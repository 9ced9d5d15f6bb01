"""
neckhead
~~~~~~~~

The multi-scale fusion neck, the anchor-free detection head, box
decoding, target assignment, the detection loss and NMS.
"""

from .assign import (GroundTruthOutOfBoundsError, ScaleTargets, Targets,
                     assign_targets, scale_for)
from .boxes import (Detection, box_iou, clip_boxes, decode, decode_boxes,
                    encode, iou)
from .head import LEVEL_STRIDES, DetectionHead, RawPrediction, head_forward
from .loss import LossBreakdown, LossWeights, ciou_loss, detection_loss
from .neck import FusionNode, MscafNeck, NeckScaleError, neck_forward
from .nms import nms

__all__ = [
    "Detection",
    "DetectionHead",
    "FusionNode",
    "GroundTruthOutOfBoundsError",
    "LEVEL_STRIDES",
    "LossBreakdown",
    "LossWeights",
    "MscafNeck",
    "NeckScaleError",
    "RawPrediction",
    "ScaleTargets",
    "Targets",
    "assign_targets",
    "box_iou",
    "ciou_loss",
    "clip_boxes",
    "decode",
    "decode_boxes",
    "detection_loss",
    "encode",
    "head_forward",
    "iou",
    "neck_forward",
    "nms",
    "scale_for",
]
