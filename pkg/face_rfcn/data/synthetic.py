"""Deterministic synthetic face-glyph dataset."""
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from ..models import Sample
from ..utils.config import DatasetSpec
from ..utils.helpers import build_sample_id

PLACEMENT_ATTEMPTS = 20
FACE_TONE = np.array([0.85, 0.68, 0.55])
EYE_TONE = np.array([0.08, 0.06, 0.05])


def quantize(image: np.ndarray) -> np.ndarray:
    """Snap values to k / 255 so 8-bit export is lossless."""
    return np.round(np.clip(image, 0.0, 1.0) * 255.0) / 255.0


def draw_glyph(image: np.ndarray, box: Tuple[int, int, int, int], tone: np.ndarray) -> None:
    """Filled ellipse inscribed in ``box`` with two dark eye dots in its upper half."""
    x1, y1, x2, y2 = box
    w, h = x2 - x1, y2 - y1
    cx, cy = x1 + 0.5 * w, y1 + 0.5 * h
    ys = np.arange(image.shape[1], dtype=np.float64)[:, None] + 0.5
    xs = np.arange(image.shape[2], dtype=np.float64)[None, :] + 0.5
    inside = ((xs - cx) / (0.5 * w)) ** 2 + ((ys - cy) / (0.5 * h)) ** 2 <= 1.0
    image[:, inside] = tone[:, None]

    radius = max(0.5, min(w, h) / 8.0)
    eye_y = cy - h / 6.0
    for eye_x in (cx - w / 4.0, cx + w / 4.0):
        dot = (xs - eye_x) ** 2 + (ys - eye_y) ** 2 <= radius**2
        if not dot.any():
            row = min(int(eye_y), image.shape[1] - 1)
            col = min(int(eye_x), image.shape[2] - 1)
            dot = np.zeros_like(inside)
            dot[row, col] = True
        image[:, dot] = EYE_TONE[:, None]


def _overlaps(box: Tuple[int, int, int, int], placed: List[Tuple[int, int, int, int]]) -> bool:
    x1, y1, x2, y2 = box
    return any(x1 < px2 and px1 < x2 and y1 < py2 and py1 < y2 for px1, py1, px2, py2 in placed)


def _place_target(
    rng: np.random.Generator, spec: DatasetSpec, placed: List[Tuple[int, int, int, int]]
) -> Optional[Tuple[int, int, int, int]]:
    lo, hi = spec.target_size
    for _ in range(PLACEMENT_ATTEMPTS):
        w, h = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        x = int(rng.integers(0, spec.image_size - w + 1))
        y = int(rng.integers(0, spec.image_size - h + 1))
        box = (x, y, x + w, y + h)
        if not _overlaps(box, placed):
            return box
    return None


def generate_sample(spec: DatasetSpec, index: int) -> Sample:
    """Sample ``index`` of the dataset; depends only on (spec, index)."""
    rng = np.random.default_rng([spec.seed, index])
    size = spec.image_size

    background = rng.uniform(0.15, 0.45, size=3)
    image = background[:, None, None] + rng.normal(0.0, 0.02, size=(3, size, size))

    lo, hi = spec.target_size
    for _ in range(int(rng.integers(0, spec.clutter + 1))):
        w, h = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        x = int(rng.integers(0, size - w + 1))
        y = int(rng.integers(0, size - h + 1))
        image[:, y : y + h, x : x + w] = rng.uniform(0.0, 1.0, size=3)[:, None, None]

    placed: List[Tuple[int, int, int, int]] = []
    count_lo, count_hi = spec.targets_per_image
    for _ in range(int(rng.integers(count_lo, count_hi + 1))):
        box = _place_target(rng, spec, placed)
        if box is None:
            continue
        tone = np.clip(FACE_TONE + rng.normal(0.0, 0.04, size=3), 0.0, 1.0)
        draw_glyph(image, box, tone)
        placed.append(box)

    gts = np.array(placed, dtype=np.float64).reshape(-1, 4)
    return Sample(id=build_sample_id(spec.seed, index), image=quantize(image), gts=gts)


def generate(spec: DatasetSpec) -> List[Sample]:
    """Generate ``spec.count`` samples; a pure function of ``spec``."""
    samples = [generate_sample(spec, index) for index in range(spec.count)]
    logger.info(
        f"Generated {len(samples)} samples with {sum(len(s.gts) for s in samples)} targets "
        f"(seed {spec.seed})"
    )
    return samples
