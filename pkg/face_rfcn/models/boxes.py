"""Pydantic models for boxes, regression deltas and detections."""
from typing import Iterable, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Box(BaseModel):
    """Axis-aligned rectangle in image pixels, corner convention (x1, y1, x2, y2)."""

    model_config = ConfigDict(frozen=True)

    x1: float
    y1: float
    x2: float
    y2: float

    @model_validator(mode="after")
    def validate_extent(self):
        if not all(np.isfinite([self.x1, self.y1, self.x2, self.y2])):
            raise ValueError(f"Box coordinates must be finite: {self.as_tuple()}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"Box has negative extent: {self.as_tuple()}")
        return self

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "Box":
        x1, y1, x2, y2 = (float(v) for v in values)
        return cls(x1=x1, y1=y1, x2=x2, y2=y2)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box":
        return cls(x1=x, y1=y, x2=x + w, y2=y + h)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return self.x1 + 0.5 * self.width, self.y1 + 0.5 * self.height

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.x1, self.y1, self.x2, self.y2

    def to_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    def scaled(self, sx: float, sy: float) -> "Box":
        return Box(x1=self.x1 * sx, y1=self.y1 * sy, x2=self.x2 * sx, y2=self.y2 * sy)

    def clipped(self, height: float, width: float) -> "Box":
        return Box(
            x1=min(max(self.x1, 0.0), width),
            y1=min(max(self.y1, 0.0), height),
            x2=min(max(self.x2, 0.0), width),
            y2=min(max(self.y2, 0.0), height),
        )


class BoxDelta(BaseModel):
    """Regression target: normalized center offsets and log size ratios."""

    model_config = ConfigDict(frozen=True)

    dx: float
    dy: float
    dw: float
    dh: float

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "BoxDelta":
        dx, dy, dw, dh = (float(v) for v in values)
        return cls(dx=dx, dy=dy, dw=dw, dh=dh)

    def to_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dw, self.dh], dtype=np.float64)


class Detection(BaseModel):
    """A scored box produced by one pyramid level."""

    model_config = ConfigDict(frozen=True)

    box: Box
    score: float = Field(..., ge=0.0, le=1.0)
    scale_tag: str = Field(default="1", description="Pyramid level that produced the detection")
    label: int = Field(default=1, ge=1, description="Foreground class index")


def boxes_to_array(boxes: Iterable[Box]) -> np.ndarray:
    """Stack boxes into an (N, 4) array."""
    rows = [box.as_tuple() for box in boxes]
    if not rows:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array(rows, dtype=np.float64)


def array_to_boxes(array: np.ndarray) -> List[Box]:
    return [Box.from_array(row) for row in np.asarray(array, dtype=np.float64).reshape(-1, 4)]
