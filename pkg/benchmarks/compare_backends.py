#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs census transform, cost volume construction, SGM aggregation, and
winner-take-all on a synthetic KITTI-sized frame under both backends and
prints a side-by-side table.  Both backends produce bit-identical
results (asserted here); only the speed differs.

Usage:
    python benchmarks/compare_backends.py [--height H] [--width W]
                                          [--max-disparity D] [--repeats N]
"""

import argparse
import time

import numpy as np

from pseudolidar import costvolume, sgm
from pseudolidar._backend import set_backend


def synthetic_pair(height, width, shift, seed=0):
    rng = np.random.default_rng(seed)
    left = rng.integers(0, 256, (height, width)).astype(np.float64)
    right = np.empty_like(left)
    right[:, : width - shift] = left[:, shift:]
    right[:, width - shift:] = rng.integers(0, 256, (height, shift))
    return left, right


def run_stages(left, right, max_disparity, params):
    timings = {}
    t0 = time.perf_counter()
    census_left = costvolume.census_transform(left)
    census_right = costvolume.census_transform(right)
    timings["census"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    volume = costvolume.build_cost_volume(census_left, census_right, max_disparity)
    timings["cost_volume"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    aggregated = sgm.aggregate(volume, params)
    timings["aggregate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    disparity = sgm.winner_take_all(aggregated)
    right_disp = sgm.right_disparity(aggregated)
    disparity = sgm.lr_consistency(disparity, right_disp, params.lr_threshold)
    timings["wta_lr"] = time.perf_counter() - t0
    return timings, disparity


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--height", type=int, default=370)
    parser.add_argument("--width", type=int, default=1224)
    parser.add_argument("--max-disparity", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    left, right = synthetic_pair(args.height, args.width, shift=11)
    params = sgm.SgmParams()
    stages = ("census", "cost_volume", "aggregate", "wta_lr")

    results = {}
    outputs = {}
    for backend in ("numba", "numpy"):
        set_backend(backend)
        run_stages(left, right, args.max_disparity, params)  # warm-up / JIT
        best = {stage: float("inf") for stage in stages}
        for _ in range(args.repeats):
            timings, disparity = run_stages(left, right, args.max_disparity, params)
            for stage in stages:
                best[stage] = min(best[stage], timings[stage])
        results[backend] = best
        outputs[backend] = disparity.data

    assert np.array_equal(outputs["numba"], outputs["numpy"]), "backends disagree"

    print(f"\nframe {args.width}x{args.height}, D={args.max_disparity}, "
          f"best of {args.repeats} runs\n")
    print(f"{'stage':<12} {'numba ms':>10} {'numpy ms':>10} {'speedup':>9}")
    total = {"numba": 0.0, "numpy": 0.0}
    for stage in stages:
        nb = results["numba"][stage] * 1000
        np_ = results["numpy"][stage] * 1000
        total["numba"] += nb
        total["numpy"] += np_
        print(f"{stage:<12} {nb:>10.1f} {np_:>10.1f} {np_ / nb:>8.1f}x")
    print(f"{'total':<12} {total['numba']:>10.1f} {total['numpy']:>10.1f} "
          f"{total['numpy'] / total['numba']:>8.1f}x")
    print("\noutputs bit-identical across backends: yes")


if __name__ == "__main__":
    main()
