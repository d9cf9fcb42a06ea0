"""Pydantic models for anchor/RoI labels and OHEM samples."""
from enum import IntEnum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Label(IntEnum):
    """Training label of an anchor or RoI."""

    IGNORE = -1
    NEGATIVE = 0
    POSITIVE = 1


class Assignment(BaseModel):
    """Label of one anchor or RoI with the ground truth it was matched to."""

    model_config = ConfigDict(frozen=True)

    label: Label
    matched_gt: Optional[int] = Field(None, ge=0, description="Index into the ground-truth list")
    max_iou: float = Field(..., ge=0.0, le=1.0)

    @model_validator(mode="after")
    def validate_match(self):
        if self.label == Label.POSITIVE and self.matched_gt is None:
            raise ValueError("Positive assignment requires a matched ground truth")
        if self.label == Label.NEGATIVE and self.matched_gt is not None:
            raise ValueError("Negative assignment cannot carry a matched ground truth")
        return self


class ScoredSample(BaseModel):
    """Candidate training sample with its classification loss (OHEM hardness)."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(..., ge=0)
    label: Label
    loss: float = Field(..., ge=0.0)

    @model_validator(mode="after")
    def validate_label(self):
        if self.label == Label.IGNORE:
            raise ValueError("OHEM samples must be positive or negative")
        return self
