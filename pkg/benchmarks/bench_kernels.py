#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Imports both backend modules directly (no env juggling), times each hot
kernel on realistic shapes, and finishes with an end-to-end registration
timing on the active backend.

Usage: python benchmarks/bench_kernels.py [--size 96] [--repeats 20]
"""

import argparse
import time

import numpy as np

from regfuse import _kernels_numpy as np_impl
from regfuse import kernels

try:
    from regfuse import _kernels_numba as nb_impl
except ImportError:
    nb_impl = None


def timeit(fn, args, repeats):
    fn(*args)  # warmup (and JIT compile)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=96)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    s = args.size
    rng = np.random.default_rng(0)
    img = rng.random((s, s))
    dx = rng.normal(0, 2, (s, s))
    dy = rng.normal(0, 2, (s, s))
    params = rng.normal(0, 2, (8, 8, 2))
    kern = np.exp(-((np.arange(7) - 3.0) ** 2) / 2.0)
    kern /= kern.sum()
    k11 = np.exp(-((np.arange(11) - 5.0) ** 2) / (2 * 1.5**2))
    k11 /= k11.sum()
    gx, gy = np_impl.sobel_xy(img)
    mask = np_impl.edge_mask(gx, gy, 1e-4)
    ys, xs = np.nonzero(mask)
    ys = ys.astype(np.int64)
    xs = xs.astype(np.int64)
    angs = np.arctan2(gy[ys, xs], gx[ys, xs])
    offs = kernels.sorted_offsets(7)

    cases = [
        ("warp_bilinear", (img, dx, dy)),
        ("sobel_xy", (img,)),
        ("gaussian_blur_sep", (img, kern)),
        ("resize_bilinear", (img, s // 2, s // 2)),
        ("densify_bilinear", (params, s, s)),
        ("edge_mask", (gx, gy, 1e-4)),
        ("match_edges", (ys, xs, angs, mask, gx, gy, offs)),
        ("residual_gap_mean", (img, img * 0.5, img * 0.9)),
        ("smooth_value", (dx, dy)),
        ("invcons_value", (dx, dy, dx, dy)),
        ("mae_mse", (img, img * 0.7)),
        ("ssim_mean", (img, img[::-1].copy(), k11, 1e-4, 9e-4)),
        ("sobel_adjoint", (dx, dy)),
    ]

    print(f"kernel timings at {s}x{s} ({args.repeats} repeats), anchors={len(ys)}")
    print(f"{'kernel':<20} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, a in cases:
        t_np = timeit(getattr(np_impl, name), a, args.repeats) * 1e3
        if nb_impl is not None:
            t_nb = timeit(getattr(nb_impl, name), a, args.repeats) * 1e3
            print(f"{name:<20} {t_np:>12.3f} {t_nb:>12.3f} {t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<20} {t_np:>12.3f} {'n/a':>12} {'':>9}")

    print(f"\nactive backend: {kernels.ACTIVE_BACKEND}")
    from regfuse.harness import MisalignmentSpec, synth_misalign
    from regfuse.register import RegisterConfig, register_pair
    from regfuse.synthetic import make_scene

    ir, vis = make_scene(1, 64)
    ir_mis = synth_misalign(ir, MisalignmentSpec("shift", 5))
    cfg = RegisterConfig(max_iterations=30, pyramid_levels=2)
    t0 = time.perf_counter()
    register_pair(ir_mis, vis, cfg, seed=1)
    print(f"register_pair 64x64 (30 iterations, 2 levels): {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
