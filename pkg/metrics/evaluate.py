"""
metrics.evaluate
~~~~~~~~~~~~~~~~

Corpus-level precision, recall, mAP50 and mAP50-95.

Detections are matched per image and per class at each IoU threshold.
AP is computed per class over the whole corpus (all-points envelope over
equal-score groups) and averaged over the classes that have ground truth.
Precision and recall are micro-averaged over classes at the first IoU
threshold (0.5 by default), counting only detections scoring at least
``score_thr``; 0/0 counts as 0.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

from neckhead.boxes import Detection

from .ap import average_precision
from .matching import GroundTruth, match_detections

log = logging.getLogger(__name__)

IOU_THRESHOLDS: Tuple[float, ...] = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))
REPORT_COLUMNS = ("precision", "recall", "map50", "map50_95")


@dataclass
class EvalResult:
    """Detection metrics of one evaluation run."""

    precision: float = 0.0
    recall: float = 0.0
    ap_per_iou: Dict[float, float] = field(default_factory=dict)
    ap_per_class: Dict[int, float] = field(default_factory=dict)
    map50: float = 0.0
    map50_95: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Report as plain JSON values; IoU keys formatted with two decimals."""
        return {
            "precision": self.precision,
            "recall": self.recall,
            "map50": self.map50,
            "map50_95": self.map50_95,
            "ap_per_iou": {f"{t:.2f}": ap for t, ap in sorted(self.ap_per_iou.items())},
            "ap_per_class": {str(c): ap for c, ap in sorted(self.ap_per_class.items())},
        }


def _safe_ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _class_ap(
    dets_per_image: Sequence[Sequence[Detection]],
    gts_per_image: Sequence[Sequence[GroundTruth]],
    class_id: int,
    iou_thr: float,
) -> Tuple[Fraction, int, List[Tuple[float, bool]]]:
    scored: List[Tuple[float, bool]] = []
    n_gt = 0
    for dets, gts in zip(dets_per_image, gts_per_image):
        class_dets = [d for d in dets if d.class_id == class_id]
        class_gts = [g for g in gts if g.class_id == class_id]
        n_gt += len(class_gts)
        match = match_detections(class_dets, class_gts, iou_thr)
        scored.extend(zip(match.scores, match.tp))
    scored.sort(key=lambda p: -p[0])
    ap = average_precision([tp for _, tp in scored], n_gt, [s for s, _ in scored])
    return ap, n_gt, scored


def evaluate(
    dets_per_image: Sequence[Sequence[Detection]],
    gts_per_image: Sequence[Sequence[GroundTruth]],
    score_thr: float = 0.25,
    iou_thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> EvalResult:
    """Precision and recall at ``score_thr`` and IoU 0.5, AP per class and IoU, mAP50 and mAP50-95.

    Raises:
        ValueError: if the detection and ground-truth lists cover different image counts.
    """
    if len(dets_per_image) != len(gts_per_image):
        raise ValueError(
            f"{len(dets_per_image)} detection lists for {len(gts_per_image)} images"
        )
    classes = sorted({g.class_id for gts in gts_per_image for g in gts})
    result = EvalResult()
    if not classes:
        log.info("evaluate: no ground truth in %d images", len(gts_per_image))
        return result

    class_aps: Dict[int, List[Fraction]] = {c: [] for c in classes}
    tp_at_thr = n_det_at_thr = n_gt_total = 0
    for t in iou_thresholds:
        per_class = []
        for c in classes:
            ap, n_gt, scored = _class_ap(dets_per_image, gts_per_image, c, t)
            per_class.append(ap)
            class_aps[c].append(ap)
            if t == iou_thresholds[0]:
                n_gt_total += n_gt
                kept = [tp for s, tp in scored if s >= score_thr]
                tp_at_thr += sum(kept)
                n_det_at_thr += len(kept)
        result.ap_per_iou[t] = float(sum(per_class) / len(per_class))

    result.precision = _safe_ratio(tp_at_thr, n_det_at_thr)
    result.recall = _safe_ratio(tp_at_thr, n_gt_total)
    result.ap_per_class = {c: float(sum(aps) / len(aps)) for c, aps in class_aps.items()}
    result.map50 = result.ap_per_iou[iou_thresholds[0]]
    result.map50_95 = float(np.mean(list(result.ap_per_iou.values())))
    log.info(
        "evaluate: precision=%.4f recall=%.4f mAP50=%.4f mAP50-95=%.4f",
        result.precision, result.recall, result.map50, result.map50_95,
    )
    return result


def summarize_runs(runs: Sequence[Mapping[str, Any]], by: Sequence[str] = ()) -> pd.DataFrame:
    """Mean and sample standard deviation of the report columns over runs.

    With ``by`` the runs are grouped on those keys first (for example the
    ablation flags), one row per group.
    """
    df = pd.DataFrame([dict(r) for r in runs])
    columns = [c for c in REPORT_COLUMNS if c in df.columns]
    if by:
        summary = df.groupby(list(by))[columns].agg(["mean", "std"])
    else:
        summary = df[columns].agg(["mean", "std"]).T.stack().to_frame().T
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    return summary.reset_index() if by else summary
