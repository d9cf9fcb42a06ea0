"""Anchor grid generation and IoU-rule label assignment for anchors and RoIs."""
from typing import Iterable, List, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..models import Assignment, Box, Label, boxes_to_array
from ..utils.config import AnchorConfig
from .geometry import box_iou

BoxesLike = Union[np.ndarray, Iterable[Box]]


def as_box_array(boxes: BoxesLike) -> np.ndarray:
    """Accept an (N, 4) array or an iterable of Box and return an (N, 4) float array."""
    if isinstance(boxes, np.ndarray):
        return boxes.astype(np.float64, copy=False).reshape(-1, 4)
    return boxes_to_array(boxes)


class AnchorLabels(BaseModel):
    """Vectorized assignment result: one label, matched gt (-1 if none) and max IoU per box."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    labels: np.ndarray
    matched: np.ndarray
    max_iou: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def positive_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == Label.POSITIVE)

    def negative_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == Label.NEGATIVE)

    def as_assignments(self) -> List[Assignment]:
        out = []
        for label, matched, max_iou in zip(self.labels, self.matched, self.max_iou):
            label = Label(int(label))
            out.append(
                Assignment(
                    label=label,
                    matched_gt=int(matched) if label == Label.POSITIVE else None,
                    max_iou=float(max_iou),
                )
            )
        return out


def anchor_shapes(cfg: AnchorConfig) -> np.ndarray:
    """(A, 2) anchor widths and heights, ordered scale-major then ratio."""
    shapes = []
    for scale in cfg.scales:
        side = scale * cfg.base_stride
        for ratio in cfg.aspect_ratios:
            root = np.sqrt(ratio)
            shapes.append((side / root, side * root))
    return np.array(shapes, dtype=np.float64)


def generate_anchors(cfg: AnchorConfig, feature_h: int, feature_w: int) -> np.ndarray:
    """
    Tile every (scale, ratio) anchor over a feature grid.

    Args:
        cfg: anchor configuration
        feature_h: grid height in cells
        feature_w: grid width in cells

    Returns:
        (feature_h * feature_w * A, 4) boxes; anchor index = ((i * feature_w + j) * S + s) * R + r
    """
    if feature_h < 1 or feature_w < 1:
        raise ValueError(f"Feature grid must be at least 1x1, got {feature_h}x{feature_w}")

    stride = cfg.base_stride
    shapes = anchor_shapes(cfg)
    cy, cx = np.meshgrid(
        (np.arange(feature_h) + 0.5) * stride,
        (np.arange(feature_w) + 0.5) * stride,
        indexing="ij",
    )
    centers = np.stack([cx.ravel(), cy.ravel()], axis=1)

    half = 0.5 * shapes
    anchors = np.concatenate(
        [centers[:, None, :] - half[None, :, :], centers[:, None, :] + half[None, :, :]], axis=2
    )
    return anchors.reshape(-1, 4)


def assign_anchors(
    anchors: BoxesLike, gts: BoxesLike, pos_iou: float = 0.7, neg_iou: float = 0.3
) -> AnchorLabels:
    """
    Label anchors against ground truths.

    Rule 1: every anchor reaching a gt's maximum (nonzero) IoU is positive, even below pos_iou.
    Rule 2: any anchor whose best IoU is >= pos_iou is positive.
    Rule 3: remaining anchors with best IoU < neg_iou are negative; everything else is ignored.
    Rule-2 positives are matched to their highest-IoU gt. An anchor positive only through Rule 1
    is matched to the gt that claimed it (the highest-IoU claimant when several do). Ties go to
    the lowest gt index.
    """
    if not 0.0 <= neg_iou <= pos_iou <= 1.0:
        raise ValueError(f"Thresholds must satisfy 0 <= neg <= pos <= 1, got {neg_iou}, {pos_iou}")

    anchors = as_box_array(anchors)
    gts = as_box_array(gts)
    n = len(anchors)

    if len(gts) == 0:
        return AnchorLabels(
            labels=np.full(n, Label.NEGATIVE, dtype=np.int8),
            matched=np.full(n, -1, dtype=np.int64),
            max_iou=np.zeros(n, dtype=np.float64),
        )

    overlaps = box_iou(anchors, gts)
    argmax = overlaps.argmax(axis=1) if n else np.zeros(0, dtype=np.int64)
    max_iou = overlaps.max(axis=1) if n else np.zeros(0, dtype=np.float64)

    labels = np.full(n, Label.IGNORE, dtype=np.int8)
    labels[max_iou < neg_iou] = Label.NEGATIVE

    if n:
        gt_max = overlaps.max(axis=0)
        best_for_gt = (overlaps == gt_max[None, :]) & (gt_max[None, :] > 0)
        claimed = best_for_gt.any(axis=1)
        labels[claimed] = Label.POSITIVE
        claimant = np.where(best_for_gt, overlaps, -1.0).argmax(axis=1)
        argmax = np.where(claimed & (max_iou < pos_iou), claimant, argmax)
    labels[max_iou >= pos_iou] = Label.POSITIVE

    matched = np.where(labels == Label.POSITIVE, argmax, -1).astype(np.int64)
    return AnchorLabels(labels=labels, matched=matched, max_iou=max_iou)


def assign_rois(
    rois: BoxesLike, gts: BoxesLike, pos_iou: float = 0.5, neg_lo: float = 0.1
) -> AnchorLabels:
    """RoI bands: positive when best IoU > pos_iou, negative in [neg_lo, pos_iou], else ignore."""
    rois = as_box_array(rois)
    gts = as_box_array(gts)
    n = len(rois)

    if len(gts) == 0 or n == 0:
        max_iou = np.zeros(n, dtype=np.float64)
        argmax = np.zeros(n, dtype=np.int64)
    else:
        overlaps = box_iou(rois, gts)
        max_iou = overlaps.max(axis=1)
        argmax = overlaps.argmax(axis=1)

    labels = np.full(n, Label.IGNORE, dtype=np.int8)
    labels[(max_iou >= neg_lo) & (max_iou <= pos_iou)] = Label.NEGATIVE
    labels[max_iou > pos_iou] = Label.POSITIVE

    matched = np.where(labels == Label.POSITIVE, argmax, -1).astype(np.int64)
    return AnchorLabels(labels=labels, matched=matched, max_iou=max_iou)
