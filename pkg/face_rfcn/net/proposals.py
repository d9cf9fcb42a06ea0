"""Region proposals from RPN outputs."""
from typing import NamedTuple, Tuple

import numpy as np
from loguru import logger

from ..errors import ShapeError
from ..ops.geometry import decode_boxes, descending_order, nms_indices
from ..ops.losses import softmax
from ..utils.config import DEFAULT_DECODE_CLIP


class Proposals(NamedTuple):
    boxes: np.ndarray
    scores: np.ndarray
    anchor_index: np.ndarray


def flatten_rpn_logits(rpn_logits: np.ndarray) -> np.ndarray:
    """(2A, H, W) -> (H * W * A, 2), rows in anchor order."""
    channels, height, width = rpn_logits.shape
    return rpn_logits.reshape(channels // 2, 2, height, width).transpose(2, 3, 0, 1).reshape(-1, 2)


def flatten_rpn_deltas(rpn_deltas: np.ndarray) -> np.ndarray:
    """(4A, H, W) -> (H * W * A, 4), rows in anchor order."""
    channels, height, width = rpn_deltas.shape
    return rpn_deltas.reshape(channels // 4, 4, height, width).transpose(2, 3, 0, 1).reshape(-1, 4)


def unflatten_rpn_logits(flat: np.ndarray, shape: Tuple[int, int, int]) -> np.ndarray:
    channels, height, width = shape
    return flat.reshape(height, width, channels // 2, 2).transpose(2, 3, 0, 1).reshape(shape)


def unflatten_rpn_deltas(flat: np.ndarray, shape: Tuple[int, int, int]) -> np.ndarray:
    channels, height, width = shape
    return flat.reshape(height, width, channels // 4, 4).transpose(2, 3, 0, 1).reshape(shape)


def propose(
    rpn_logits: np.ndarray,
    rpn_deltas: np.ndarray,
    anchors: np.ndarray,
    pre_nms_top: int,
    post_nms_top: int,
    nms_thresh: float,
    image_shape: Tuple[int, int],
    min_size: float = 0.0,
    max_log_ratio: float = DEFAULT_DECODE_CLIP,
) -> Proposals:
    """
    Decode, clip, filter, rank and suppress RPN boxes.

    Args:
        rpn_logits: (2A, Hf, Wf) objectness logits
        rpn_deltas: (4A, Hf, Wf) anchor regressions
        anchors: (Hf * Wf * A, 4) anchors in generate_anchors order
        image_shape: (height, width) used for clipping
        min_size: boxes whose clipped width or height is <= min_size are dropped

    Returns:
        Proposals sorted by descending foreground probability (ties by anchor index)
    """
    logits = flatten_rpn_logits(rpn_logits)
    deltas = flatten_rpn_deltas(rpn_deltas)
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    if len(logits) != len(anchors) or len(deltas) != len(anchors):
        raise ShapeError(
            f"RPN outputs cover {len(logits)} anchors but {len(anchors)} anchors were given"
        )

    scores = softmax(logits)[:, 1]
    boxes = decode_boxes(deltas, anchors, clip_window=image_shape, max_log_ratio=max_log_ratio)
    widths = boxes[:, 2] - boxes[:, 0]
    heights = boxes[:, 3] - boxes[:, 1]
    valid = np.flatnonzero((widths > min_size) & (heights > min_size))

    order = valid[descending_order(scores[valid])][:pre_nms_top]
    keep = order[nms_indices(boxes[order], scores[order], nms_thresh)][:post_nms_top]
    logger.debug(f"Proposals: {len(valid)} valid, {len(order)} ranked, {len(keep)} kept")
    return Proposals(boxes[keep], scores[keep], keep.astype(np.int64))
