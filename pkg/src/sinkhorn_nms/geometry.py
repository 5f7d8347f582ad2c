"""Axis-aligned box and soft-mask primitives.

Boxes are corner-encoded real rectangles; area is (x2 - x1) * (y2 - y1) with
no pixel convention attached. Masks are 2-d grids of occupancy values in
[0, 1]; binary masks are the {0, 1} special case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Box:
    """Rectangle with x1 <= x2 and y1 <= y2, all coordinates finite."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"box corners out of order: {coords}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Mask:
    """Grid of occupancy values in [0, 1], stored row-major as (height, width)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError("mask must be a non-empty 2-d grid")
        if not np.isfinite(values).all():
            raise ValueError("mask values must be finite")
        if (values < 0.0).any() or (values > 1.0).any():
            raise ValueError("mask values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0.0 when the union has no area.

    Degenerate (zero-area) boxes are allowed and never intersect anything
    with positive measure, so two degenerate boxes give 0.0.
    """
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def quality_score(p: Box, gts: Sequence[Box]) -> float:
    """Maximum IoU between ``p`` and any ground-truth box; 0.0 when none exist."""
    if not gts:
        return 0.0
    return max(iou(p, gt) for gt in gts)


def total_variation(m: Mask) -> float:
    """Anisotropic total variation: sum of |forward differences| along both axes.

    Out-of-bounds neighbours are skipped (no wraparound), so a constant mask
    has total variation exactly 0.
    """
    v = m.values
    return float(np.abs(np.diff(v, axis=0)).sum() + np.abs(np.diff(v, axis=1)).sum())
