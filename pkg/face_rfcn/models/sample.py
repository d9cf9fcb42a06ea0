"""Pydantic model for a dataset sample."""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Sample(BaseModel):
    """One image (3 x H x W, values in [0, 1]) with its ground-truth boxes (G x 4)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str = Field(..., description="Sample identifier, also the image file stem")
    image: np.ndarray
    gts: np.ndarray

    @field_validator("gts", mode="before")
    @classmethod
    def validate_gts_shape(cls, v):
        return np.asarray(v, dtype=np.float64).reshape(-1, 4)

    @model_validator(mode="after")
    def validate_bounds(self):
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise ValueError(f"Image must have shape (3, H, W), got {self.image.shape}")
        _, height, width = self.image.shape
        gts = self.gts
        if len(gts):
            if np.any(gts[:, 2] <= gts[:, 0]) or np.any(gts[:, 3] <= gts[:, 1]):
                raise ValueError("Ground-truth boxes must have positive area")
            if np.any(gts[:, :2] < 0) or np.any(gts[:, 2] > width) or np.any(gts[:, 3] > height):
                raise ValueError("Ground-truth boxes must lie within the image")
        return self

    @property
    def height(self) -> int:
        return int(self.image.shape[1])

    @property
    def width(self) -> int:
        return int(self.image.shape[2])
