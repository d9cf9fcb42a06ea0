"""Detection evaluation: matching, PR / discrete ROC curves and difficulty buckets."""
from .curves import (
    average_precision,
    bucket_masks,
    discrete_roc,
    evaluate_dataset,
    pr_curve,
    write_curve,
)
from .detections import read_detections, write_detections
from .matching import match, restrict_to_gts

__all__ = [
    "average_precision",
    "bucket_masks",
    "discrete_roc",
    "evaluate_dataset",
    "pr_curve",
    "write_curve",
    "read_detections",
    "write_detections",
    "match",
    "restrict_to_gts",
]
