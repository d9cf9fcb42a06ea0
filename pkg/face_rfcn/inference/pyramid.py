"""Multi-scale training resize and test-time image pyramid."""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import cv2
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from ..models import Box, Detection, boxes_to_array
from ..ops.geometry import batched_nms, clip_boxes
from ..utils.config import PyramidConfig

Detector = Callable[[np.ndarray, object], List[Detection]]


class ResizeResult(BaseModel):
    """Resized (3, H, W) image and boxes; ``scale_x``/``scale_y`` map original to resized pixels."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    image: np.ndarray
    gts: np.ndarray
    scale_x: float
    scale_y: float

    @property
    def scale(self) -> float:
        """Mean of the per-axis factors."""
        return 0.5 * (self.scale_x + self.scale_y)


def align_to_stride(size: float, stride: Optional[int]) -> int:
    """Round to the nearest positive multiple of ``stride`` (or to a positive integer)."""
    if stride is None:
        return max(1, int(round(size)))
    return max(stride, int(round(size / stride)) * stride)


def resize_image(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a (3, H, W) image; edge pixels are replicated."""
    _, src_h, src_w = image.shape
    if (src_h, src_w) == (height, width):
        return image.copy()
    hwc = np.ascontiguousarray(np.transpose(image, (1, 2, 0)), dtype=np.float64)
    resized = cv2.resize(hwc, (width, height), interpolation=cv2.INTER_LINEAR)
    return np.ascontiguousarray(np.transpose(resized, (2, 0, 1)))


def scale_boxes(boxes: np.ndarray, scale_x: float, scale_y: float) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    return boxes * np.array([scale_x, scale_y, scale_x, scale_y])


def unscale_boxes(boxes: np.ndarray, scale_x: float, scale_y: float) -> np.ndarray:
    """Inverse of scale_boxes."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    return boxes / np.array([scale_x, scale_y, scale_x, scale_y])


def resize_to(image: np.ndarray, gts: np.ndarray, height: int, width: int) -> ResizeResult:
    _, src_h, src_w = image.shape
    scale_x = width / src_w
    scale_y = height / src_h
    return ResizeResult(
        image=resize_image(image, height, width),
        gts=scale_boxes(gts, scale_x, scale_y),
        scale_x=scale_x,
        scale_y=scale_y,
    )


def resize_for_training(
    image: np.ndarray,
    gts: np.ndarray,
    short_sides: Sequence[int],
    rng: np.random.Generator,
    stride: Optional[int] = None,
) -> ResizeResult:
    """
    Resize so the shorter side equals one of ``short_sides`` (drawn uniformly from ``rng``).

    With ``stride`` both sides are rounded to the nearest multiple of it; boxes follow the
    actual per-axis factors.
    """
    if not short_sides:
        raise ValueError("At least one training short side is required")
    target = short_sides[int(rng.integers(len(short_sides)))]
    _, height, width = image.shape
    factor = target / min(height, width)
    ((new_h, new_w),) = level_sizes(height, width, [factor], stride)
    return resize_to(image, gts, new_h, new_w)


def _scale_level(
    image: np.ndarray,
    state: object,
    scale: float,
    detector: Detector,
    stride: Optional[int],
) -> List[Detection]:
    _, height, width = image.shape
    ((level_h, level_w),) = level_sizes(height, width, [scale], stride)
    level = resize_to(image, np.zeros((0, 4)), level_h, level_w)
    dets = detector(level.image, state)
    if not dets:
        return []

    boxes = unscale_boxes(boxes_to_array(d.box for d in dets), level.scale_x, level.scale_y)
    boxes = clip_boxes(boxes, height, width)
    tag = f"{scale:g}"
    out = []
    for det, box in zip(dets, boxes):
        if box[2] <= box[0] or box[3] <= box[1]:
            continue
        out.append(
            Detection(box=Box.from_array(box), score=det.score, scale_tag=tag, label=det.label)
        )
    logger.debug(f"Pyramid level {tag}: {level.image.shape[1:]} -> {len(out)} detections")
    return out


def merge_detections(dets: List[Detection], iou_threshold: float) -> List[Detection]:
    """Per-label NMS over detections from every level, by descending score."""
    if not dets:
        return []
    boxes = boxes_to_array(d.box for d in dets)
    scores = np.array([d.score for d in dets], dtype=np.float64)
    labels = np.array([d.label for d in dets], dtype=np.int64)
    return [dets[i] for i in batched_nms(boxes, scores, labels, iou_threshold)]


def detect_pyramid(
    image: np.ndarray,
    state: object,
    cfg: PyramidConfig,
    detector: Detector,
    stride: Optional[int] = None,
) -> List[Detection]:
    """
    Run ``detector`` on every test scale and merge the results in original coordinates.

    Args:
        image: (3, H, W) image
        state: model state passed through to ``detector``
        cfg: test scales, merge threshold and worker count
        detector: callable (image, state) -> detections
        stride: level sizes are rounded to multiples of it

    Returns:
        Merged detections sorted by descending score, tagged with their level's scale
    """
    scales = list(cfg.test_scales)

    def _run(scale: float) -> List[Detection]:
        return _scale_level(image, state, scale, detector, stride)

    if cfg.workers > 1 and len(scales) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            per_level = list(executor.map(_run, scales))
    else:
        per_level = [_run(scale) for scale in scales]

    merged = merge_detections([d for level in per_level for d in level], cfg.merge_nms_thresh)
    logger.debug(
        f"Pyramid {scales}: {sum(len(level) for level in per_level)} detections, "
        f"{len(merged)} after merge"
    )
    return merged


def level_sizes(
    height: int, width: int, scales: Sequence[float], stride: Optional[int] = None
) -> List[Tuple[int, int]]:
    """(height, width) of each pyramid level."""
    return [
        (align_to_stride(height * s, stride), align_to_stride(width * s, stride)) for s in scales
    ]
