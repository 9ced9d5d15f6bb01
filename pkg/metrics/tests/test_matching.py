import pytest

from metrics.matching import GroundTruth, match_detections, visiting_order
from neckhead.boxes import Detection, iou

from .factory import GroundTruthFactory, random_corpus


def exhaustive_greedy(dets, gts, iou_thr):
    """Repeatedly take the best remaining detection and scan every ground truth for it."""
    remaining = list(range(len(dets)))
    taken = set()
    flags = {}
    while remaining:
        k = min(remaining, key=lambda m: (-dets[m].score, tuple(dets[m].box), dets[m].class_id))
        remaining.remove(k)
        options = [
            (iou(dets[k].box, g.box), -g_idx)
            for g_idx, g in enumerate(gts)
            if g_idx not in taken and g.class_id == dets[k].class_id and iou(dets[k].box, g.box) >= iou_thr
        ]
        if options:
            chosen = -max(options)[1]
            taken.add(chosen)
            flags[k] = chosen
        else:
            flags[k] = -1
    return flags


class TestMatchDetections:
    """Greedy matching of detections to ground truth."""

    def test_duplicates(self):
        """Test that only the first duplicate is a true positive."""
        gt = GroundTruthFactory()
        dets = [Detection(gt.box, 0.9), Detection(gt.box, 0.8)]
        result = match_detections(dets, [gt])
        assert result.tp == [True, False]
        assert result.matched_gt == [0, -1]

    def test_no_ground_truth(self):
        """Test that every detection is a false positive without ground truth."""
        dets = [Detection((0, 0, 5, 5), 0.9), Detection((1, 1, 4, 4), 0.3)]
        assert match_detections(dets, []).tp == [False, False]

    def test_class_must_agree(self):
        """Test that a detection of another class does not match."""
        gt = GroundTruthFactory(class_id=1)
        assert match_detections([Detection(gt.box, 0.9, class_id=0)], [gt]).tp == [False]

    def test_below_threshold(self):
        """Test that an overlap below the threshold does not match."""
        gt = GroundTruth((0.0, 0.0, 10.0, 10.0))
        det = Detection((5.0, 0.0, 15.0, 10.0), 0.9)
        assert match_detections([det], [gt], 0.5).tp == [False]
        assert match_detections([det], [gt], 0.3).tp == [True]

    def test_best_overlap_wins(self):
        """Test that a detection takes the box it overlaps most."""
        gts = [GroundTruth((0.0, 0.0, 10.0, 10.0)), GroundTruth((1.0, 0.0, 11.0, 10.0))]
        result = match_detections([Detection((1.0, 0.0, 11.0, 10.0), 0.9)], gts)
        assert result.matched_gt == [1]

    def test_order_independent(self):
        """Test that input order does not change the visiting order."""
        dets = [Detection((0, 0, 5, 5), 0.5), Detection((0, 0, 6, 6), 0.5), Detection((1, 1, 5, 5), 0.7)]
        assert visiting_order(dets) == [2, 0, 1]
        rev = dets[::-1]
        assert [rev[k] for k in visiting_order(rev)] == [dets[k] for k in visiting_order(dets)]

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_exhaustive_greedy(self, seed):
        """Test against an exhaustive greedy reference."""
        dets_per_image, gts_per_image = random_corpus(seed)
        for iou_thr in (0.5, 0.75):
            for dets, gts in zip(dets_per_image, gts_per_image):
                result = match_detections(dets, gts, iou_thr)
                expected = exhaustive_greedy(dets, gts, iou_thr)
                assert dict(zip(result.order, result.matched_gt)) == expected
                assert len(set(g for g in result.matched_gt if g >= 0)) == result.num_tp
