#!/usr/bin/env python3
"""Time the jitted kernels against their pure-numpy counterparts.

Runs every kernel in ``changeforge.kernels.IMPLEMENTATIONS`` on a
representative workload and prints a per-kernel table.  The numba column
is blank when the jitted path is unavailable (e.g. under
``CHANGEFORGE_NO_NUMBA=1``).

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import math
import time

import numpy as np

from changeforge import kernels


def _workloads(rng):
    img = rng.uniform(0, 255, size=(200, 260, 3))
    alpha = (rng.uniform(0, 1, size=(200, 260)) > 0.3).astype(np.float64)
    theta = math.radians(37.0)
    c, s = math.cos(theta), math.sin(theta)
    out_w = int(math.ceil(abs(c) * 260 + abs(s) * 200))
    out_h = int(math.ceil(abs(s) * 260 + abs(c) * 200))

    mask = rng.uniform(0, 1, size=(256, 256))
    taps = kernels.gaussian_taps(1.1)

    ang = np.sort(rng.uniform(0, 2 * math.pi, 10))
    r = rng.uniform(40, 100, 10)
    xs, ys = 128 + r * np.cos(ang), 128 + r * np.sin(ang)

    hm = rng.uniform(0, 1, size=(128, 128))
    pxs = rng.integers(0, 128, 5).astype(np.int64)
    pys = rng.integers(0, 128, 5).astype(np.int64)
    sigmas = rng.uniform(1.0, 4.0, 5)

    y = rng.uniform(1e-4, 1 - 1e-4, size=(128, 128))
    g = rng.uniform(0, 1, size=(128, 128))
    g[rng.uniform(size=g.shape) > 0.98] = 1.0

    return {
        "rotate_bilinear": lambda fn: fn(img, alpha, c, s, out_h, out_w),
        "blur_separable": lambda fn: fn(mask, taps),
        "polygon_mask": lambda fn: fn(xs, ys, 0.0, 0.0, 256, 256),
        "splat_gaussians": lambda fn: fn(np.zeros((128, 128)), pxs, pys, sigmas),
        "local_peaks": lambda fn: fn(hm, 0.3),
        "focal_sum": lambda fn: fn(y, g, 2.0, 4.0),
        "focal_grad": lambda fn: fn(y, g, 2.0, 4.0),
    }


def _time(call, fn, repeats):
    call(fn)  # warm-up (includes JIT compilation for the numba path)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        call(fn)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    work = _workloads(np.random.default_rng(0))
    print(f"{'kernel':<18} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, call in work.items():
        pair = kernels.IMPLEMENTATIONS[name]
        t_np = _time(call, pair["numpy"], args.repeats) * 1e3
        if pair["numba"] is not None:
            t_nb = _time(call, pair["numba"], args.repeats) * 1e3
            print(f"{name:<18} {t_np:>12.3f} {t_nb:>12.3f} {t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<18} {t_np:>12.3f} {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
