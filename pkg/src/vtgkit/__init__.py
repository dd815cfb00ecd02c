"""Data-quality and training-recipe toolkit for video temporal grounding.

Operates on annotation and prediction files, never on model weights:
interval arithmetic and dataset I/O, R1@m / mIoU evaluation, free-text
timestamp parsing, quality linting, difficulty-aware subset sampling,
group-relative reward accounting with plateau detection, timestamp
encoding planning, and a human audit service.
"""
from ._kernels import BACKEND as KERNEL_BACKEND
from .spans import TimeSpan, temporal_iou

__version__ = "0.1.0"

__all__ = ["TimeSpan", "temporal_iou", "KERNEL_BACKEND", "__version__"]
