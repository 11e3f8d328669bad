"""Compare the compiled kernel against the pure-numpy fallback.

Usage: python3 benchmarks/bench_backends.py [--size 96] [--channels 64] [--repeat 5]
"""

import argparse
import time

import numpy as np

from flowloss import _kernels_py
from flowloss.patches import GridSpec, build_grid

try:
    from flowloss import _kernels
except ImportError:
    _kernels = None


def bench(kernel, feat, flow, origins, k, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        kernel.patch_loss_pass(feat, flow, None, origins, k, 0.1, 0.7, 1e-12, True)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=96)
    ap.add_argument("--channels", type=int, default=64)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--stride", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    feat = rng.normal(size=(args.channels, args.size, args.size))
    flow = rng.normal(size=(2, args.size, args.size))
    grid = build_grid(GridSpec(args.size, args.size, args.k, args.stride))
    origins = np.array(grid.windows, dtype=np.int64).reshape(-1, 2)

    print(f"feature map {args.channels}x{args.size}x{args.size}, "
          f"K={args.k}, stride={args.stride}, {len(origins)} windows, loss+grad")

    t_py = bench(_kernels_py, feat, flow, origins, args.k, args.repeat)
    print(f"  python  {t_py * 1e3:8.2f} ms")
    if _kernels is None:
        print("  cython  (extension not built)")
        return
    t_cy = bench(_kernels, feat, flow, origins, args.k, args.repeat)
    print(f"  cython  {t_cy * 1e3:8.2f} ms   ({t_py / t_cy:.1f}x speedup)")

    # sanity: both backends agree
    lp, mp, sp, gp = _kernels_py.patch_loss_pass(feat, flow, None, origins, args.k, 0.1, 0.7, 1e-12, True)
    lc, mc, sc, gc = _kernels.patch_loss_pass(feat, flow, None, origins, args.k, 0.1, 0.7, 1e-12, True)
    print(f"  max |loss diff| {np.max(np.abs(lp - lc)):.3g}, "
          f"max |grad diff| {np.max(np.abs(gp - gc)):.3g}")


if __name__ == "__main__":
    main()
