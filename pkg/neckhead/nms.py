"""
neckhead.nms
~~~~~~~~~~~~

Greedy per-class non-maximum suppression.
"""

from typing import List, Sequence

import numpy as np

from .boxes import Detection

DEFAULT_IOU_THR = 0.45
DEFAULT_SCORE_THR = 0.25
DEFAULT_MAX_OUT = 300


def _suppress(boxes: np.ndarray, order: np.ndarray, iou_thr: float) -> List[int]:
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = np.clip(x2 - x1, 0, None) * np.clip(y2 - y1, 0, None)
    keep = []
    while order.size > 0:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        xx1 = np.maximum(x1[i], x1[rest])
        yy1 = np.maximum(y1[i], y1[rest])
        xx2 = np.minimum(x2[i], x2[rest])
        yy2 = np.minimum(y2[i], y2[rest])
        inter = np.clip(xx2 - xx1, 0, None) * np.clip(yy2 - yy1, 0, None)
        union = areas[i] + areas[rest] - inter
        ovr = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
        order = rest[ovr <= iou_thr]
    return keep


def nms(
    dets: Sequence[Detection],
    iou_thr: float = DEFAULT_IOU_THR,
    score_thr: float = DEFAULT_SCORE_THR,
    max_out: int = DEFAULT_MAX_OUT,
) -> List[Detection]:
    """Keep the best-scoring detections of each class.

    Detections scoring below ``score_thr`` are dropped. Within a class,
    detections are visited by descending score, the earlier one first on a
    tie, and each kept box suppresses every later box overlapping it by
    more than ``iou_thr``. The result is sorted by descending score and cut
    at ``max_out``.
    """
    candidates = [k for k, d in enumerate(dets) if d.score >= score_thr]
    if not candidates:
        return []
    boxes = np.array([dets[k].box for k in candidates], dtype=np.float64)
    scores = np.array([dets[k].score for k in candidates], dtype=np.float64)
    classes = np.array([dets[k].class_id for k in candidates])

    kept: List[int] = []
    for class_id in np.unique(classes):
        members = np.flatnonzero(classes == class_id)
        order = members[np.argsort(-scores[members], kind="stable")]
        kept.extend(_suppress(boxes, order, iou_thr))

    kept.sort(key=lambda k: (-scores[k], k))
    return [dets[candidates[k]] for k in kept[:max_out]]
