"""Axis-aligned box and point primitives shared by every other module.

Boxes come in two layouts: corner form ``(x1, y1, x2, y2)``, which every
scoring and metric routine operates on, and top-left/size form
``(x, y, w, h)`` as stored in MOT ground-truth files. All coordinates are
real-valued pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _finite(value: float, name: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return v


@dataclass(frozen=True)
class BBox:
    """Corner-form box with x1 <= x2 and y1 <= y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x1", _finite(self.x1, "x1"))
        object.__setattr__(self, "y1", _finite(self.y1, "y1"))
        object.__setattr__(self, "x2", _finite(self.x2, "x2"))
        object.__setattr__(self, "y2", _finite(self.y2, "y2"))
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(
                f"inverted box corners: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BBox":
        """Build a box from possibly swapped corners (parser recovery path)."""
        return cls(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))

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
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def translated(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)


@dataclass(frozen=True)
class BBoxXYWH:
    """Top-left/size box with nonnegative width and height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _finite(self.x, "x"))
        object.__setattr__(self, "y", _finite(self.y, "y"))
        object.__setattr__(self, "w", _finite(self.w, "w"))
        object.__setattr__(self, "h", _finite(self.h, "h"))
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box dimensions: w={self.w}, h={self.h}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _finite(self.x, "x"))
        object.__setattr__(self, "y", _finite(self.y, "y"))


@dataclass(frozen=True)
class MotionVector:
    """Per-frame center displacement in pixels."""

    dx: float
    dy: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "dx", _finite(self.dx, "dx"))
        object.__setattr__(self, "dy", _finite(self.dy, "dy"))

    def norm(self) -> float:
        return math.hypot(self.dx, self.dy)

    def dot(self, other: "MotionVector") -> float:
        return self.dx * other.dx + self.dy * other.dy


def xywh_to_xyxy(b: BBoxXYWH) -> BBox:
    """Convert top-left/size form to corner form: x2 = x + w, y2 = y + h."""
    return BBox(b.x, b.y, b.x + b.w, b.y + b.h)


def xyxy_to_xywh(b: BBox) -> BBoxXYWH:
    """Inverse of :func:`xywh_to_xyxy`."""
    return BBoxXYWH(b.x1, b.y1, b.x2 - b.x1, b.y2 - b.y1)


def center(b: BBox) -> Point:
    return Point((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union in [0, 1]; 0 when the union has zero area."""
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    inter = max(0.0, ix2 - ix1) * max(0.0, iy2 - iy1)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def mean_l1(a: BBox, b: BBox) -> float:
    """Mean absolute difference of the four corner coordinates."""
    return (
        abs(a.x1 - b.x1) + abs(a.y1 - b.y1) + abs(a.x2 - b.x2) + abs(a.y2 - b.y2)
    ) / 4.0


def euclidean(p: Point, q: Point) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def point_in_box(p: Point, b: BBox) -> bool:
    """Closed-interval membership test on both axes."""
    return b.x1 <= p.x <= b.x2 and b.y1 <= p.y <= b.y2


def displacement(start: Point, end: Point) -> MotionVector:
    return MotionVector(end.x - start.x, end.y - start.y)
