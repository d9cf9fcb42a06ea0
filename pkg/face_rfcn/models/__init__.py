"""Data models for the detector."""
from .assignment import Assignment, Label, ScoredSample
from .boxes import Box, BoxDelta, Detection, array_to_boxes, boxes_to_array
from .reports import BenchReport, BucketResult, Curve, EvalSummary, LossReport, MatchResult
from .sample import Sample

__all__ = [
    "Assignment",
    "Label",
    "ScoredSample",
    "Box",
    "BoxDelta",
    "Detection",
    "array_to_boxes",
    "boxes_to_array",
    "BenchReport",
    "BucketResult",
    "Curve",
    "EvalSummary",
    "LossReport",
    "MatchResult",
    "Sample",
]
