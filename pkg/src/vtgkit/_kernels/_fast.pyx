# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel implementations.

Must stay operation-for-operation equivalent to ``_py.py`` so both
backends produce identical results (the weighted-draw Fenwick arithmetic
in particular).
"""
import numpy as np

BACKEND = "compiled"


def iou_pairs(a_start, a_end, b_start, b_end):
    """Elementwise temporal IoU of two span arrays."""
    cdef double[::1] a_s = np.ascontiguousarray(a_start, dtype=np.float64)
    cdef double[::1] a_e = np.ascontiguousarray(a_end, dtype=np.float64)
    cdef double[::1] b_s = np.ascontiguousarray(b_start, dtype=np.float64)
    cdef double[::1] b_e = np.ascontiguousarray(b_end, dtype=np.float64)
    cdef Py_ssize_t n = a_s.shape[0]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double inter, union
    for i in range(n):
        inter = min(a_e[i], b_e[i]) - max(a_s[i], b_s[i])
        if inter < 0.0:
            inter = 0.0
        union = (a_e[i] - a_s[i]) + (b_e[i] - b_s[i]) - inter
        if union > 0.0:
            out[i] = inter / union
    return out_arr


def group_center(rewards):
    """Mean-center each row of a (n_groups, G) reward matrix."""
    cdef double[:, ::1] r = np.ascontiguousarray(rewards, dtype=np.float64)
    cdef Py_ssize_t rows = r.shape[0], cols = r.shape[1]
    out_arr = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double mean
    for i in range(rows):
        mean = 0.0
        for j in range(cols):
            mean += r[i, j]
        mean /= cols
        for j in range(cols):
            out[i, j] = r[i, j] - mean
    return out_arr


def weighted_draws(weights, uniforms, replace):
    """Sequential weighted draws via a Fenwick tree, one per uniform."""
    w_arr = np.array(weights, dtype=np.float64, copy=True)
    cdef double[::1] w = w_arr
    cdef double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    tree_arr = np.zeros(n + 1, dtype=np.float64)
    cdef double[::1] tree = tree_arr
    cdef Py_ssize_t i, j, k, pos, bit, nxt, top
    cdef double total = 0.0, target, delta
    for i in range(n):
        tree[i + 1] = w[i]
        total += w[i]
    for i in range(1, n + 1):
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]
    top = 1
    while top * 2 <= n:
        top *= 2

    out_arr = np.empty(u.shape[0], dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef bint repl = bool(replace)
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
        if not repl:
            delta = -w[pos]
            total += delta
            w[pos] = 0.0
            i = pos + 1
            while i <= n:
                tree[i] += delta
                i += i & -i
    return out_arr
