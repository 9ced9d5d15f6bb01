"""
metrics.ap
~~~~~~~~~~

All-points interpolated average precision in exact rational arithmetic.
"""

from fractions import Fraction
from itertools import groupby
from typing import List, Optional, Sequence, Tuple


def pr_points(
    tp: Sequence[bool], n_gt: int, scores: Optional[Sequence[float]] = None
) -> List[Tuple[Fraction, Fraction]]:
    """(recall, precision) after each detection, or after each equal-score group when scores are given.

    ``tp`` must already be in descending score order.
    """
    if scores is None:
        groups = [[flag] for flag in tp]
    else:
        paired = zip(scores, tp)
        groups = [[flag for _, flag in grp] for _, grp in groupby(paired, key=lambda p: p[0])]
    points = []
    hits = seen = 0
    for grp in groups:
        hits += sum(grp)
        seen += len(grp)
        points.append((Fraction(hits, n_gt), Fraction(hits, seen)))
    return points


def average_precision(
    tp: Sequence[bool], n_gt: int, scores: Optional[Sequence[float]] = None
) -> Fraction:
    """Area under the precision envelope over recall.

    The envelope at recall r is the best precision reached at any recall
    >= r. Returns 0 when there is no ground truth or no detection.
    """
    if n_gt <= 0 or not tp:
        return Fraction(0)
    points = pr_points(tp, n_gt, scores)
    envelope = []
    best = Fraction(0)
    for recall, precision in reversed(points):
        best = max(best, precision)
        envelope.append((recall, best))
    envelope.reverse()

    area = Fraction(0)
    previous = Fraction(0)
    for recall, precision in envelope:
        area += (recall - previous) * precision
        previous = recall
    return area
