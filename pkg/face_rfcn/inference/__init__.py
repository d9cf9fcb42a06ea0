"""Multi-scale training resize and pyramid inference."""
from .pyramid import (
    ResizeResult,
    detect_pyramid,
    resize_for_training,
    resize_image,
    unscale_boxes,
)

__all__ = [
    "ResizeResult",
    "detect_pyramid",
    "resize_for_training",
    "resize_image",
    "unscale_boxes",
]
