"""Time intervals on a video timeline and interval arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

# Endpoint comparisons tolerate this much float noise (seconds).
EQ_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TimeSpan:
    """A closed interval [start, end] in seconds, start < end."""

    start: float
    end: float

    def __post_init__(self) -> None:
        start = float(self.start)
        end = float(self.end)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise ValueError(f"span endpoints must be finite, got ({self.start}, {self.end})")
        if start < 0:
            raise ValueError(f"span start must be non-negative, got {start}")
        if not start < end:
            raise ValueError(f"span must have positive length, got ({start}, {end})")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @property
    def length(self) -> float:
        return self.end - self.start

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSpan):
            return NotImplemented
        return (
            abs(self.start - other.start) <= EQ_TOLERANCE
            and abs(self.end - other.end) <= EQ_TOLERANCE
        )

    def __hash__(self) -> int:
        # Tolerant __eq__ forbids hashing on raw endpoints.
        return hash((round(self.start, 5), round(self.end, 5)))


def temporal_iou(a: TimeSpan, b: TimeSpan) -> float:
    """Intersection-over-union of two spans, in [0, 1].

    Symmetric; 1.0 exactly when the spans coincide, 0.0 when the overlap
    has zero length (touching intervals included).
    """
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter <= 0.0:
        return 0.0
    union = a.length + b.length - inter
    return inter / union


def iou_array(
    pred_starts: np.ndarray,
    pred_ends: np.ndarray,
    gt_starts: np.ndarray,
    gt_ends: np.ndarray,
) -> np.ndarray:
    """Batch temporal IoU over parallel span arrays (kernel-backed)."""
    return _kernels.iou_pairs(pred_starts, pred_ends, gt_starts, gt_ends)
