"""End-to-end inference: proposals, position-sensitive pooling, scoring and per-class NMS."""
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from ..errors import ShapeError
from ..inference.pyramid import detect_pyramid
from ..models import Box, Detection
from ..ops.anchors import generate_anchors
from ..ops.geometry import batched_nms, decode_boxes
from ..ops.losses import softmax
from ..ops.pooling import ps_avg_pool_forward, psroi_pool_forward_batch
from ..utils.config import DEFAULT_DECODE_CLIP, AnchorConfig, DetectConfig, RunConfig
from .network import NetworkState, forward
from .proposals import propose

DEFAULT_DELTA_STDS = (0.1, 0.1, 0.2, 0.2)


def pad_to_stride(image: np.ndarray, stride: int) -> np.ndarray:
    """Zero-pad the bottom and right edges up to the next multiple of ``stride``."""
    _, height, width = image.shape
    pad_h = -height % stride
    pad_w = -width % stride
    if not pad_h and not pad_w:
        return image
    return np.pad(image, ((0, 0), (0, pad_h), (0, pad_w)))


def detect(
    image: np.ndarray,
    state: NetworkState,
    score_thresh: float = 0.05,
    nms_thresh: float = 0.3,
    anchor_cfg: Optional[AnchorConfig] = None,
    detect_cfg: Optional[DetectConfig] = None,
    delta_stds: Sequence[float] = DEFAULT_DELTA_STDS,
    max_log_ratio: float = DEFAULT_DECODE_CLIP,
) -> List[Detection]:
    """
    Detect faces in one (3, H, W) image.

    Images whose sides are not stride multiples are zero-padded; boxes are clipped to the
    original extent.

    Returns:
        Detections with score >= score_thresh, sorted by descending score
    """
    spec = state.spec
    anchor_cfg = anchor_cfg or AnchorConfig(base_stride=spec.feature_stride)
    detect_cfg = detect_cfg or DetectConfig()
    if anchor_cfg.num_anchors != spec.num_anchors:
        raise ShapeError(
            f"Anchor config yields {anchor_cfg.num_anchors} anchors per cell, "
            f"network predicts {spec.num_anchors}"
        )

    _, height, width = image.shape
    padded = pad_to_stride(np.asarray(image, dtype=np.float64), spec.feature_stride)
    output = forward(padded, state)
    feature_h, feature_w = output.feature_shape
    anchors = generate_anchors(anchor_cfg, feature_h, feature_w)

    proposals = propose(
        output.rpn_logits,
        output.rpn_deltas,
        anchors,
        detect_cfg.rpn_pre_nms_top,
        detect_cfg.rpn_post_nms_top,
        detect_cfg.rpn_nms_thresh,
        (height, width),
        min_size=detect_cfg.min_size,
        max_log_ratio=max_log_ratio,
    )
    rois = proposals.boxes
    if len(rois) == 0:
        return []

    scale = 1.0 / spec.feature_stride
    pooled_cls = psroi_pool_forward_batch(output.cls_maps, rois, spec.k, scale)
    probs = np.clip(softmax(ps_avg_pool_forward(pooled_cls, state.cls_weights)), 0.0, 1.0)
    pooled_box = psroi_pool_forward_batch(output.box_maps, rois, spec.k, scale)
    deltas = ps_avg_pool_forward(pooled_box, state.box_weights) * np.asarray(delta_stds)
    boxes = decode_boxes(deltas, rois, clip_window=(height, width), max_log_ratio=max_log_ratio)
    valid = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])

    cand_boxes, cand_scores, cand_labels = [], [], []
    for label in range(1, spec.num_classes + 1):
        keep = np.flatnonzero(valid & (probs[:, label] >= score_thresh))
        cand_boxes.append(boxes[keep])
        cand_scores.append(probs[keep, label])
        cand_labels.append(np.full(len(keep), label, dtype=np.int64))
    cand_boxes = np.concatenate(cand_boxes)
    cand_scores = np.concatenate(cand_scores)
    cand_labels = np.concatenate(cand_labels)

    kept = batched_nms(cand_boxes, cand_scores, cand_labels, nms_thresh)
    logger.debug(f"Detect: {len(rois)} RoIs, {len(cand_scores)} above threshold, {len(kept)} kept")
    return [
        Detection(
            box=Box.from_array(cand_boxes[i]),
            score=float(cand_scores[i]),
            label=int(cand_labels[i]),
        )
        for i in kept
    ]


class Detector:
    """Single-scale and pyramid detection bound to one run configuration."""

    def __init__(self, state: NetworkState, config: RunConfig):
        self.state = state
        self.config = config

    def __call__(self, image: np.ndarray, state: Optional[NetworkState] = None) -> List[Detection]:
        cfg = self.config
        return detect(
            image,
            state if state is not None else self.state,
            cfg.detect.score_thresh,
            cfg.detect.nms_thresh,
            anchor_cfg=cfg.anchors,
            detect_cfg=cfg.detect,
            delta_stds=cfg.train.head_delta_stds,
            max_log_ratio=cfg.train.decode_clip,
        )

    def detect_pyramid(self, image: np.ndarray) -> List[Detection]:
        return detect_pyramid(
            image, self.state, self.config.pyramid, self, stride=self.state.spec.feature_stride
        )

    def run(self, image: np.ndarray, single_scale: bool = False) -> List[Detection]:
        return self(image) if single_scale else self.detect_pyramid(image)
