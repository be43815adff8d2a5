#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Both backends are imported directly, so the SEMGEO_BACKEND flag does not
matter here. Results are checked for equality before timing.

Usage:
  python benchmarks/bench_kernels.py [--repeat 20] [--size 64]
"""

import argparse
import time

import numpy as np

from semgeo.kernels import numba_impl, numpy_impl

R_KM = 6371.0088


def best_of(fn, repeat):
    fn()  # warm-up, triggers numba compilation
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(size, n_points, rng):
    lat1, lat2 = rng.uniform(-90, 90, (2, n_points))
    lon1, lon2 = rng.uniform(-180, 180, (2, n_points))
    e = rng.normal(size=(size, size)).astype(np.float32)
    raw = rng.normal(size=(size, size, 3)).astype(np.float32)
    labels = rng.integers(0, 150, (size, size)).astype(np.int64)
    mask = rng.random((size, size)) < 0.02
    k = min(1000, size * size)
    topk = numpy_impl.top_k_mask(e, k)
    return {
        "haversine_km": lambda m: m.haversine_km(lat1, lon1, lat2, lon2, R_KM),
        "channel_max": lambda m: m.channel_max(raw),
        "top_k_mask": lambda m: m.top_k_mask(e, k),
        "dilate_chebyshev(b=3)": lambda m: m.dilate_chebyshev(mask, 3),
        "dilate_chebyshev(b=30)": lambda m: m.dilate_chebyshev(mask, 30),
        "label_overlap_counts": lambda m: m.label_overlap_counts(labels, topk, 150),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--size", type=int, default=224, help="raster side length in pixels")
    ap.add_argument("--points", type=int, default=100_000, help="coordinate pairs for haversine")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"raster {args.size}x{args.size}, {args.points} coordinate pairs, best of {args.repeat}")
    print(f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, call in cases(args.size, args.points, rng).items():
        a, b = call(numpy_impl), call(numba_impl)
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            if x.dtype.kind == "f":
                np.testing.assert_allclose(x, y, rtol=1e-12)
            else:
                np.testing.assert_array_equal(x, y)
        t_np = best_of(lambda: call(numpy_impl), args.repeat)
        t_nb = best_of(lambda: call(numba_impl), args.repeat)
        print(f"{name:<24}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
