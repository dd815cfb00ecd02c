"""Pure-Python kernel implementations (numpy-vectorized where possible).

Fallback backend used when the compiled extension is unavailable. The
weighted-draw routine mirrors the compiled one operation for operation so
both backends produce identical selections from identical uniforms.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def iou_pairs(a_start, a_end, b_start, b_end):
    """Elementwise temporal IoU of two span arrays."""
    a_start = np.asarray(a_start, dtype=np.float64)
    a_end = np.asarray(a_end, dtype=np.float64)
    b_start = np.asarray(b_start, dtype=np.float64)
    b_end = np.asarray(b_end, dtype=np.float64)
    inter = np.minimum(a_end, b_end) - np.maximum(a_start, b_start)
    inter = np.maximum(inter, 0.0)
    union = (a_end - a_start) + (b_end - b_start) - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def group_center(rewards):
    """Mean-center each row of a (n_groups, G) reward matrix."""
    rewards = np.asarray(rewards, dtype=np.float64)
    return rewards - rewards.mean(axis=1, keepdims=True)


def weighted_draws(weights, uniforms, replace):
    """Sequential weighted draws via a Fenwick tree, one per uniform.

    Without replacement, each drawn item's weight is removed before the
    next draw. Returns 0-based indices in draw order.
    """
    w = np.asarray(weights, dtype=np.float64).copy()
    u = np.asarray(uniforms, dtype=np.float64)
    n = w.shape[0]
    tree = np.zeros(n + 1, dtype=np.float64)
    tree[1:] = w
    total = 0.0
    for i in range(n):
        total += w[i]
    for i in range(1, n + 1):
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]
    top = 1
    while top * 2 <= n:
        top *= 2

    out = np.empty(u.shape[0], dtype=np.int64)
    for k in range(u.shape[0]):
        target = u[k] * total
        pos = 0
        bit = top
        while bit > 0:
            nxt = pos + bit
            if nxt <= n and tree[nxt] < target:
                target -= tree[nxt]
                pos = nxt
            bit >>= 1
        if pos >= n:
            pos = n - 1
        while w[pos] <= 0.0 and pos + 1 < n:
            pos += 1
        out[k] = pos
        if not replace:
            delta = -w[pos]
            total += delta
            w[pos] = 0.0
            i = pos + 1
            while i <= n:
                tree[i] += delta
                i += i & -i
    return out
