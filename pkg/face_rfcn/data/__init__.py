"""Synthetic data generation, annotation files and image I/O."""
from .annotations import AnnotationRecord, load_annotations, write_annotations
from .images import list_images, load_dataset, read_image, save_dataset, write_image
from .synthetic import generate

__all__ = [
    "AnnotationRecord",
    "load_annotations",
    "write_annotations",
    "list_images",
    "load_dataset",
    "read_image",
    "save_dataset",
    "write_image",
    "generate",
]
