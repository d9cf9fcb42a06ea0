"""Precision-recall with all-points average precision, discrete ROC and the curve file format."""
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..errors import EvaluationInputError
from ..models import BucketResult, Curve, Detection, EvalSummary, MatchResult
from ..ops.anchors import as_box_array
from ..utils.config import EvalConfig
from ..utils.helpers import format_number
from .matching import match, restrict_to_gts

BUCKETS = ("all", "easy", "medium", "hard")


def _sweep(matches: Sequence[MatchResult]) -> Tuple[np.ndarray, np.ndarray, int]:
    """Cumulative TP and FP counts over all detections by descending score, plus the gt total."""
    num_gts = sum(m.num_gts for m in matches)
    if num_gts == 0:
        raise EvaluationInputError("No ground truths to evaluate against")
    scores = np.array([s for m in matches for s in m.scores], dtype=np.float64)
    flags = np.array([tp for m in matches for tp in m.true_positive], dtype=bool)
    order = np.lexsort((np.arange(len(scores)), -scores))
    flags = flags[order]
    return np.cumsum(flags), np.cumsum(~flags), num_gts


def average_precision(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the monotone precision envelope, all recall points."""
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def pr_curve(matches: Sequence[MatchResult]) -> Curve:
    """
    Precision-recall sweep over every detection score.

    Raises:
        EvaluationInputError: no ground truths
    """
    tp, fp, num_gts = _sweep(matches)
    recall = tp / num_gts
    precision = tp / np.maximum(tp + fp, 1)
    ap = average_precision(recall, precision)
    return Curve(
        kind="pr",
        x_label="recall",
        y_label="precision",
        points=list(zip(recall.tolist(), precision.tolist())),
        summary={
            "ap": ap,
            "recall": float(recall[-1]) if len(recall) else 0.0,
            "num_gts": float(num_gts),
            "num_detections": float(len(tp)),
        },
    )


def discrete_roc(matches: Sequence[MatchResult], fp_checkpoints: Sequence[int]) -> Curve:
    """
    True positive rate against the absolute false-positive count.

    TPR at a checkpoint interpolates linearly between the best TPR reached at each distinct FP
    count; beyond the last sweep point it stays at the final TPR.

    Raises:
        EvaluationInputError: no ground truths
    """
    tp, fp, num_gts = _sweep(matches)
    fps = np.concatenate([[0], fp]).astype(np.float64)
    tpr = np.concatenate([[0], tp]) / num_gts

    distinct = np.unique(fps)
    best = np.array([tpr[fps == x].max() for x in distinct])
    summary = {f"tpr@{k}": float(np.interp(k, distinct, best)) for k in sorted(fp_checkpoints)}
    return Curve(
        kind="roc",
        x_label="false_positives",
        y_label="true_positive_rate",
        points=list(zip(fps.tolist(), tpr.tolist())),
        summary=summary,
    )


def write_curve(curve: Curve, path: Union[str, Path]) -> None:
    """Header line, one ``x,y`` row per point, then ``# key=value ...`` with the summary."""
    lines = [f"{curve.x_label},{curve.y_label}"]
    lines += [f"{format_number(x)},{format_number(y)}" for x, y in curve.points]
    lines.append("# " + " ".join(f"{k}={format_number(v)}" for k, v in curve.summary.items()))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def bucket_masks(gts: np.ndarray, cfg: EvalConfig) -> Dict[str, np.ndarray]:
    """Per-bucket gt membership by shortest side."""
    gts = as_box_array(gts)
    short = np.minimum(gts[:, 2] - gts[:, 0], gts[:, 3] - gts[:, 1])
    hard = short <= cfg.hard_max_side
    medium = ~hard & (short <= cfg.medium_max_side)
    return {
        "all": np.ones(len(gts), dtype=bool),
        "easy": ~hard & ~medium,
        "medium": medium,
        "hard": hard,
    }


def evaluate_dataset(
    detections: Dict[str, Sequence[Detection]],
    annotations: Dict[str, np.ndarray],
    cfg: EvalConfig,
) -> Tuple[EvalSummary, Dict[str, Curve]]:
    """
    Match every image, then build PR curves per difficulty bucket and one discrete ROC.

    Detections for images without annotations count as false positives.

    Returns:
        (summary, curves keyed "pr_<bucket>" and "roc")

    Raises:
        EvaluationInputError: the annotations hold no ground truths
    """
    image_ids = sorted(set(annotations) | set(detections))
    per_bucket: Dict[str, list] = {name: [] for name in BUCKETS}
    for image_id in image_ids:
        gts = as_box_array(annotations.get(image_id, np.zeros((0, 4))))
        result = match(list(detections.get(image_id, [])), gts, cfg.iou_thresh)
        for name, mask in bucket_masks(gts, cfg).items():
            per_bucket[name].append(restrict_to_gts(result, mask))

    if sum(m.num_gts for m in per_bucket["all"]) == 0:
        raise EvaluationInputError("Annotations contain no ground truths")

    curves: Dict[str, Curve] = {}
    buckets = []
    for name in BUCKETS:
        num_gts = sum(m.num_gts for m in per_bucket[name])
        if num_gts == 0:
            logger.warning(f"Bucket '{name}' has no ground truths; AP is undefined")
            buckets.append(BucketResult(name=name, num_gts=0))
            continue
        curve = pr_curve(per_bucket[name])
        curves[f"pr_{name}"] = curve
        buckets.append(
            BucketResult(
                name=name, num_gts=num_gts, ap=curve.summary["ap"], recall=curve.summary["recall"]
            )
        )

    roc = discrete_roc(per_bucket["all"], cfg.fp_checkpoints)
    curves["roc"] = roc
    summary = EvalSummary(
        iou_thresh=cfg.iou_thresh,
        num_images=len(image_ids),
        num_detections=sum(len(d) for d in detections.values()),
        buckets=buckets,
        tpr_at_fp={key.split("@", 1)[1]: value for key, value in roc.summary.items()},
    )
    logger.info("AP: " + ", ".join(f"{b.name}={b.ap:.4f}" for b in buckets if b.ap is not None))
    return summary, curves
