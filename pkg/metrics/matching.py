"""
metrics.matching
~~~~~~~~~~~~~~~~

Greedy one-to-one matching of detections to ground truth.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

from neckhead.boxes import Box, Detection, iou


@dataclass
class GroundTruth:
    """One ground-truth box with its class and image."""

    box: Box
    class_id: int = 0
    image_id: str = ""

    def to_dict(self) -> Dict[str, Any]:
        """Ground truth as plain JSON values."""
        return {"image": self.image_id, "box": list(self.box), "class": self.class_id}


@dataclass
class MatchResult:
    """Outcome of matching one image's detections.

    Attributes:
        order: detection indices in the order they were visited.
        tp: per visited detection, whether it matched.
        scores: per visited detection, its score.
        matched_gt: per visited detection, the matched ground-truth index or -1.
    """

    order: List[int] = field(default_factory=list)
    tp: List[bool] = field(default_factory=list)
    scores: List[float] = field(default_factory=list)
    matched_gt: List[int] = field(default_factory=list)

    @property
    def num_tp(self) -> int:
        return sum(self.tp)


def visiting_order(dets: Sequence[Detection]) -> List[int]:
    """Descending score; equal scores by box coordinates, then class, so input order never matters."""
    return sorted(
        range(len(dets)),
        key=lambda k: (-dets[k].score, tuple(dets[k].box), dets[k].class_id),
    )


def match_detections(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_thr: float = 0.5
) -> MatchResult:
    """Match each detection to the unmatched same-class ground truth of highest IoU.

    A detection whose best available IoU is below ``iou_thr`` is a false
    positive. Among equal IoUs the lower ground-truth index wins.
    """
    taken = [False] * len(gts)
    result = MatchResult()
    for k in visiting_order(dets):
        det = dets[k]
        best, best_iou = -1, iou_thr
        for g, gt in enumerate(gts):
            if taken[g] or gt.class_id != det.class_id:
                continue
            overlap = iou(det.box, gt.box)
            if overlap >= best_iou and (best < 0 or overlap > best_iou):
                best, best_iou = g, overlap
        if best >= 0:
            taken[best] = True
        result.order.append(k)
        result.tp.append(best >= 0)
        result.scores.append(det.score)
        result.matched_gt.append(best)
    return result
