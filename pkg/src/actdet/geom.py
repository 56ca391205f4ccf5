"""Axis-aligned box algebra in continuous pixel coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass

from actdet.errors import InputError


@dataclass(frozen=True, slots=True)
class BBox:
    """Corner-form box. Area is ``(x_max - x_min) * (y_max - y_min)``."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise InputError(f"non-finite box coordinates {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InputError(f"degenerate box {coords}: need x_min < x_max and y_min < y_max")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True, slots=True)
class CenterBox:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.cx, self.cy, self.w, self.h)):
            raise InputError("non-finite center box")
        if not (self.w > 0 and self.h > 0):
            raise InputError(f"center box needs positive size, got w={self.w}, h={self.h}")


def to_center(b: BBox) -> CenterBox:
    return CenterBox(
        (b.x_min + b.x_max) / 2.0,
        (b.y_min + b.y_max) / 2.0,
        b.x_max - b.x_min,
        b.y_max - b.y_min,
    )


def to_corner(c: CenterBox) -> BBox:
    hw, hh = c.w / 2.0, c.h / 2.0
    return BBox(c.cx - hw, c.cy - hh, c.cx + hw, c.cy + hh)


def intersection_area(a: BBox, b: BBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    if iw <= 0:
        return 0.0
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0.0 for disjoint or edge-touching boxes."""
    if not isinstance(a, BBox) or not isinstance(b, BBox):
        raise InputError("iou expects two BBox values")
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    # inter <= min(area) so union >= max(area) > 0; clamp guards round-off only
    return min(1.0, inter / union)
