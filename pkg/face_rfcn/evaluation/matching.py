"""Greedy score-ordered matching of detections to ground truths."""
from typing import List, Optional, Sequence

import numpy as np

from ..models import Detection, MatchResult, boxes_to_array
from ..ops.anchors import BoxesLike, as_box_array
from ..ops.geometry import box_iou, descending_order


def match(dets: Sequence[Detection], gts: BoxesLike, iou_thresh: float = 0.5) -> MatchResult:
    """
    Match detections in descending score order.

    Each detection takes the highest-IoU still unmatched gt (lowest index on ties) when that IoU
    is >= iou_thresh; otherwise it is a false positive.
    """
    gts = as_box_array(gts)
    scores = np.array([d.score for d in dets], dtype=np.float64)
    order = descending_order(scores)
    overlaps = box_iou(boxes_to_array(d.box for d in dets), gts)

    gt_matched = np.zeros(len(gts), dtype=bool)
    true_positive: List[bool] = []
    matched_gt: List[Optional[int]] = []
    for i in order:
        candidates = np.where(gt_matched, -1.0, overlaps[i]) if len(gts) else overlaps[i]
        best = int(np.argmax(candidates)) if len(gts) else -1
        if best >= 0 and candidates[best] >= iou_thresh:
            gt_matched[best] = True
            true_positive.append(True)
            matched_gt.append(best)
        else:
            true_positive.append(False)
            matched_gt.append(None)

    return MatchResult(
        scores=[float(scores[i]) for i in order],
        true_positive=true_positive,
        matched_gt=matched_gt,
        gt_matched=gt_matched.tolist(),
    )


def restrict_to_gts(result: MatchResult, keep_gt: Sequence[bool]) -> MatchResult:
    """
    View of ``result`` over a subset of gts: detections matched to excluded gts are dropped and
    gt indices are renumbered.
    """
    keep_gt = np.asarray(keep_gt, dtype=bool)
    new_index = np.cumsum(keep_gt) - 1
    scores, true_positive, matched_gt = [], [], []
    for score, tp, gt in zip(result.scores, result.true_positive, result.matched_gt):
        if gt is not None and not keep_gt[gt]:
            continue
        scores.append(score)
        true_positive.append(tp)
        matched_gt.append(None if gt is None else int(new_index[gt]))
    return MatchResult(
        scores=scores,
        true_positive=true_positive,
        matched_gt=matched_gt,
        gt_matched=[m for m, k in zip(result.gt_matched, keep_gt) if k],
    )
