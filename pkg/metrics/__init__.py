"""
metrics
~~~~~~~

Detection matching, average precision and corpus evaluation.
"""

from .ap import average_precision, pr_points
from .evaluate import (IOU_THRESHOLDS, EvalResult, evaluate, summarize_runs)
from .matching import GroundTruth, MatchResult, match_detections

__all__ = [
    "EvalResult",
    "GroundTruth",
    "IOU_THRESHOLDS",
    "MatchResult",
    "average_precision",
    "evaluate",
    "match_detections",
    "pr_points",
    "summarize_runs",
]
