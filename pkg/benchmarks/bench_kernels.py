#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from vtgkit._kernels import _py

try:
    from vtgkit._kernels import _fast
except ImportError:
    _fast = None


def bench(fn, *args, repeat: int = 5) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n = 1_000_000
    a_s = rng.uniform(0, 100, n)
    a_e = a_s + rng.uniform(0.1, 50, n)
    b_s = rng.uniform(0, 100, n)
    b_e = b_s + rng.uniform(0.1, 50, n)
    rewards = rng.uniform(0, 2, (100_000, 8))
    weights = rng.random(100_000)
    uniforms = rng.random(10_000)

    cases = [
        ("iou_pairs (1M spans)", lambda m: m.iou_pairs(a_s, a_e, b_s, b_e)),
        ("group_center (100k x 8)", lambda m: m.group_center(rewards)),
        ("weighted_draws w/o repl (10k of 100k)",
         lambda m: m.weighted_draws(weights, uniforms, False)),
    ]

    backends = [("python", _py)] + ([("compiled", _fast)] if _fast is not None else [])
    print(f"{'kernel':<40}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for label, runner in cases:
        times = [bench(runner, module, repeat=args.repeat) for _, module in backends]
        row = f"{label:<40}" + "".join(f"{t * 1000:>10.1f}ms" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)

    if _fast is not None:
        same = np.array_equal(
            _py.weighted_draws(weights, uniforms, False),
            _fast.weighted_draws(weights, uniforms, False),
        )
        print(f"\nselection identity across backends: {'OK' if same else 'MISMATCH'}")


if __name__ == "__main__":
    main()
