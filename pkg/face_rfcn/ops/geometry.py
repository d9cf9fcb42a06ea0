"""Box arithmetic, IoU, regression encoding/decoding and non-maximum suppression."""
from typing import List, Optional, Tuple

import numpy as np

from ..errors import BoxError
from ..models import Box, BoxDelta, Detection, boxes_to_array
from ..utils.config import DEFAULT_DECODE_CLIP


def box_area(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    return (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])


def box_iou(boxes1: np.ndarray, boxes2: np.ndarray) -> np.ndarray:
    """
    Pairwise IoU between two sets of corner boxes.

    Args:
        boxes1: (N, 4) boxes in (x1, y1, x2, y2) format
        boxes2: (M, 4) boxes in (x1, y1, x2, y2) format

    Returns:
        (N, M) IoU matrix; pairs with zero union area get 0
    """
    boxes1 = np.asarray(boxes1, dtype=np.float64).reshape(-1, 4)
    boxes2 = np.asarray(boxes2, dtype=np.float64).reshape(-1, 4)

    lt = np.maximum(boxes1[:, None, :2], boxes2[None, :, :2])
    rb = np.minimum(boxes1[:, None, 2:], boxes2[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = box_area(boxes1)[:, None] + box_area(boxes2)[None, :] - inter

    iou = np.zeros_like(inter)
    np.divide(inter, union, out=iou, where=union > 0)
    return np.minimum(iou, 1.0)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0 when the union is empty."""
    return float(box_iou(a.to_array(), b.to_array())[0, 0])


def _center_form(boxes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    w = boxes[:, 2] - boxes[:, 0]
    h = boxes[:, 3] - boxes[:, 1]
    return boxes[:, 0] + 0.5 * w, boxes[:, 1] + 0.5 * h, w, h


def encode_boxes(gts: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Regression targets (dx, dy, dw, dh) taking each anchor row onto the matching gt row."""
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    if gts.shape != anchors.shape:
        raise BoxError(f"encode needs one anchor per gt, got {gts.shape} and {anchors.shape}")

    ax, ay, aw, ah = _center_form(anchors)
    gx, gy, gw, gh = _center_form(gts)
    if np.any(aw <= 0) or np.any(ah <= 0):
        raise BoxError("Cannot encode against an anchor with zero width or height")
    if np.any(gw <= 0) or np.any(gh <= 0):
        raise BoxError("Cannot encode a ground truth with zero width or height")

    return np.stack(
        [(gx - ax) / aw, (gy - ay) / ah, np.log(gw / aw), np.log(gh / ah)], axis=1
    )


def encode(gt: Box, anchor: Box) -> BoxDelta:
    return BoxDelta.from_array(encode_boxes(gt.to_array(), anchor.to_array())[0])


def clip_boxes(boxes: np.ndarray, height: float, width: float) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4).copy()
    boxes[:, 0::2] = np.clip(boxes[:, 0::2], 0.0, width)
    boxes[:, 1::2] = np.clip(boxes[:, 1::2], 0.0, height)
    return boxes


def decode_boxes(
    deltas: np.ndarray,
    anchors: np.ndarray,
    clip_window: Optional[Tuple[float, float]] = None,
    max_log_ratio: float = DEFAULT_DECODE_CLIP,
) -> np.ndarray:
    """
    Inverse of encode_boxes.

    Args:
        deltas: (N, 4) regression values
        anchors: (N, 4) reference boxes
        clip_window: optional (height, width) the output is clipped to
        max_log_ratio: upper clamp on dw, dh before exponentiation

    Returns:
        (N, 4) boxes in corner format
    """
    deltas = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    ax, ay, aw, ah = _center_form(anchors)

    dw = np.minimum(deltas[:, 2], max_log_ratio)
    dh = np.minimum(deltas[:, 3], max_log_ratio)
    cx = deltas[:, 0] * aw + ax
    cy = deltas[:, 1] * ah + ay
    w = np.exp(dw) * aw
    h = np.exp(dh) * ah

    boxes = np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=1)
    if clip_window is not None:
        boxes = clip_boxes(boxes, *clip_window)
    return boxes


def decode(
    delta: BoxDelta,
    anchor: Box,
    clip_window: Optional[Tuple[float, float]] = None,
    max_log_ratio: float = DEFAULT_DECODE_CLIP,
) -> Box:
    if anchor.width <= 0 or anchor.height <= 0:
        raise BoxError("Cannot decode against a degenerate anchor")
    decoded = decode_boxes(delta.to_array(), anchor.to_array(), clip_window, max_log_ratio)
    return Box.from_array(decoded[0])


def descending_order(scores: np.ndarray) -> np.ndarray:
    """Indices sorting ``scores`` descending; equal scores keep ascending index order."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    return np.lexsort((np.arange(len(scores)), -scores))


def nms_indices(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float) -> np.ndarray:
    """
    Greedy non-maximum suppression.

    A box is suppressed when its IoU with an already kept, higher-ranked box is strictly greater
    than ``iou_threshold``.

    Returns:
        Indices of kept boxes in descending score order
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    order = descending_order(scores)
    suppressed = np.zeros(len(boxes), dtype=bool)
    keep: List[int] = []

    for pos, i in enumerate(order):
        if suppressed[i]:
            continue
        keep.append(int(i))
        rest = order[pos + 1 :]
        rest = rest[~suppressed[rest]]
        if len(rest) == 0:
            continue
        overlap = box_iou(boxes[i : i + 1], boxes[rest])[0]
        suppressed[rest[overlap > iou_threshold]] = True

    return np.array(keep, dtype=np.int64)


def batched_nms(
    boxes: np.ndarray, scores: np.ndarray, labels: np.ndarray, iou_threshold: float
) -> np.ndarray:
    """NMS applied independently per label; kept indices in descending score order."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    labels = np.asarray(labels).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    kept: List[np.ndarray] = []
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        kept.append(idx[nms_indices(boxes[idx], scores[idx], iou_threshold)])
    if not kept:
        return np.zeros(0, dtype=np.int64)
    kept_all = np.sort(np.concatenate(kept))
    return kept_all[descending_order(scores[kept_all])]


def nms(dets: List[Detection], iou_threshold: float) -> List[Detection]:
    """Greedy NMS over detections; survivors are returned unmodified, by descending score."""
    if not dets:
        return []
    boxes = boxes_to_array(d.box for d in dets)
    scores = np.array([d.score for d in dets], dtype=np.float64)
    return [dets[i] for i in nms_indices(boxes, scores, iou_threshold)]
