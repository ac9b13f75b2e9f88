#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--frames N] [--pairs N] [--repeat N]
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from trajaudit._kernels import backends


def timeit(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def build_track(rng, n):
    x = rng.normal(scale=0.3, size=n).cumsum() + np.linspace(0, 0.4 * n, n)
    y = rng.normal(scale=0.3, size=n).cumsum()
    yaw = rng.normal(scale=math.radians(8), size=n)
    gaps = np.ones(n, dtype=np.int64)
    return x, y, yaw, gaps


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--frames", type=int, default=200_000)
    parser.add_argument("--pairs", type=int, default=400_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    mods = backends()
    if len(mods) < 2:
        print("note: compiled extension not built; benchmarking fallback only")

    rng = np.random.default_rng(0)
    x, y, yaw, gaps = build_track(rng, args.frames)
    m = args.pairs
    pair_args = [rng.normal(scale=5.0, size=m) for _ in range(4)]
    pair_args.append(np.abs(rng.normal(scale=2.0, size=m)) + 0.3)
    pair_args += [rng.normal(scale=5.0, size=m) for _ in range(4)]
    pair_args.append(np.abs(rng.normal(scale=2.0, size=m)) + 0.3)

    cases = {
        f"smooth_positions ({args.frames} frames)": lambda mod: mod.smooth_positions(
            x, y, gaps, 9, 0.3, 0.1
        ),
        f"heading pass ({args.frames} frames)": lambda mod: mod.stabilize_headings(
            yaw,
            mod.motion_heading(x, y, gaps, 0.1, 0.75, 0.35, 0.08)[0],
            np.full(args.frames, 0.2),
            gaps,
            9,
            math.radians(20),
            math.radians(2.5),
        ),
        f"pair metrics ({args.pairs} frames)": lambda mod: mod.pair_metric_arrays(
            *pair_args, True
        ),
    }

    name_w = max(len(k) for k in cases)
    header = f"{'kernel':<{name_w}}  " + "  ".join(f"{n:>12}" for n in mods)
    if len(mods) == 2:
        header += f"  {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, call in cases.items():
        times = {name: timeit(lambda mod=mod: call(mod), args.repeat) for name, mod in mods.items()}
        row = f"{label:<{name_w}}  " + "  ".join(
            f"{times[n] * 1e3:>10.1f}ms" for n in mods
        )
        if len(times) == 2:
            row += f"  {times['python'] / times['native']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
