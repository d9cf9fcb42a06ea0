"""8-bit image files and on-disk datasets."""
from pathlib import Path
from typing import List, Sequence, Union

import cv2
import numpy as np
from loguru import logger

from ..errors import MissingArtifactError
from ..models import Sample, array_to_boxes, boxes_to_array
from .annotations import load_annotations, write_annotations

IMAGE_DIR = "images"
ANNOTATION_FILE = "annotations.txt"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def read_image(path: Union[str, Path]) -> np.ndarray:
    """Read an 8-bit image as a float64 (3, H, W) RGB array in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Image not found: {path}")
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise MissingArtifactError(f"Cannot decode image: {path}")
    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
    return np.ascontiguousarray(np.transpose(rgb, (2, 0, 1)), dtype=np.float64) / 255.0


def write_image(path: Union[str, Path], image: np.ndarray) -> None:
    """Write a (3, H, W) RGB array in [0, 1] as an 8-bit image."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rgb = np.round(np.clip(np.transpose(image, (1, 2, 0)), 0.0, 1.0) * 255.0).astype(np.uint8)
    if not cv2.imwrite(str(path), cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR)):
        raise OSError(f"Failed to write image {path}")


def list_images(directory: Union[str, Path]) -> List[Path]:
    """Image files directly under ``directory``, sorted by name."""
    return sorted(
        p for p in Path(directory).iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def save_dataset(samples: Sequence[Sample], out_dir: Union[str, Path]) -> Path:
    """
    Write ``images/<id>.png`` plus ``annotations.txt`` with paths relative to ``out_dir``.

    Returns:
        Path of the annotation file
    """
    out_dir = Path(out_dir)
    (out_dir / IMAGE_DIR).mkdir(parents=True, exist_ok=True)
    records = []
    for sample in samples:
        relative = f"{IMAGE_DIR}/{sample.id}.png"
        write_image(out_dir / relative, sample.image)
        records.append((relative, array_to_boxes(sample.gts)))
    annotation_path = out_dir / ANNOTATION_FILE
    write_annotations(records, annotation_path)
    logger.info(f"Saved {len(samples)} samples to {out_dir}")
    return annotation_path


def _usable_gts(gts: np.ndarray, width: int, height: int, path: Path) -> np.ndarray:
    """Clip boxes to the image and drop the ones left with no area."""
    clipped = gts.copy()
    clipped[:, 0::2] = np.clip(clipped[:, 0::2], 0.0, width)
    clipped[:, 1::2] = np.clip(clipped[:, 1::2], 0.0, height)
    keep = (clipped[:, 2] > clipped[:, 0]) & (clipped[:, 3] > clipped[:, 1])
    if not keep.all():
        logger.warning(f"Skipping {int((~keep).sum())} empty ground-truth box(es) in {path}")
    return clipped[keep]


def load_dataset(annotation_path: Union[str, Path]) -> List[Sample]:
    """Load every annotated image; relative image paths resolve against the file's directory."""
    annotation_path = Path(annotation_path)
    root = annotation_path.parent
    samples = []
    for image_path, boxes in load_annotations(annotation_path):
        path = Path(image_path)
        if not path.is_absolute():
            path = root / path
        image = read_image(path)
        gts = _usable_gts(boxes_to_array(boxes), image.shape[2], image.shape[1], path)
        samples.append(Sample(id=path.stem, image=image, gts=gts))
    logger.info(f"Loaded {len(samples)} samples from {annotation_path}")
    return samples
