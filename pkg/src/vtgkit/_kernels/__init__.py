"""Numeric kernel backend selection.

The compiled extension is used when available; setting the environment
variable ``VTGKIT_PURE_PYTHON=1`` forces the pure-Python fallback. Both
backends expose the same functions and produce identical results.
"""
from __future__ import annotations

import os

if os.environ.get("VTGKIT_PURE_PYTHON") == "1":
    from . import _py as _backend
else:
    try:
        from . import _fast as _backend  # type: ignore[attr-defined]
    except ImportError:
        from . import _py as _backend

BACKEND = _backend.BACKEND
iou_pairs = _backend.iou_pairs
group_center = _backend.group_center
weighted_draws = _backend.weighted_draws

__all__ = ["BACKEND", "iou_pairs", "group_center", "weighted_draws"]
