"""Compare the compiled and pure-numpy pixel kernels.

Usage: python benchmarks/bench_kernels.py [--size 480x640] [--frames 200]

Times highpass_sum (the per-frame hot loop: threshold against a background
model and accumulate the residual) on identical random inputs, and verifies
the two backends agree bit-exactly before reporting throughput.
"""

import argparse
import time

import numpy as np

from densigraph import _kernels_py


def load_cython():
    try:
        from densigraph import _ckernels

        return _ckernels
    except ImportError:
        return None


def bench(mod, frames, bg, tau):
    start = time.perf_counter()
    total = 0
    for frame in frames:
        d, active = mod.highpass_sum(frame, bg, tau)
        total += d
    elapsed = time.perf_counter() - start
    return elapsed, total


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", default="480x640", help="frame size HxW")
    parser.add_argument("--frames", type=int, default=200)
    parser.add_argument("--tau", type=float, default=25.0)
    args = parser.parse_args()
    h, w = (int(p) for p in args.size.split("x"))

    rng = np.random.default_rng(0)
    frames = [rng.integers(0, 256, (h, w), dtype=np.uint8) for _ in range(args.frames)]
    bg = rng.uniform(0, 255, (h, w))

    cy = load_cython()
    t_py, total_py = bench(_kernels_py, frames, bg, args.tau)
    mpix = h * w * args.frames / 1e6
    print(f"frames: {args.frames} @ {h}x{w} ({mpix:.1f} Mpix)")
    print(f"numpy : {t_py:.4f}s  ({mpix / t_py:.1f} Mpix/s)")
    if cy is None:
        print("cython: extension not built (pip install -e . with Cython available)")
        return
    t_cy, total_cy = bench(cy, frames, bg, args.tau)
    match = "bit-exact" if total_cy == total_py else "MISMATCH"
    print(f"cython: {t_cy:.4f}s  ({mpix / t_cy:.1f} Mpix/s)  [{match} vs numpy]")
    print(f"speedup: {t_py / t_cy:.2f}x")
    if total_cy != total_py:
        raise SystemExit(f"backend disagreement: {total_py} vs {total_cy}")


if __name__ == "__main__":
    main()
