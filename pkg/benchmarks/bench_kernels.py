"""Wall-clock comparison of the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
from __future__ import annotations

import argparse
import itertools
import time

import numpy as np

from minmax_lab import gallery, reductions
from minmax_lab.kernels import backends
from minmax_lab.verify import ball_offsets, rows_array, slice_interval_rows


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    qvi = gallery.irrational_kakutani_qvi(0.05)
    rows = rows_array(qvi.correspondence.interval_form())
    D, c = qvi.F.D, qvi.F.c
    N = 256

    def colour(k):
        return lambda: k.color_interval_grid(N, 2, rows, D, c, 1.0, 0.02, 0, (N + 1) ** 2)

    colours = backends()["python"].color_interval_grid(N, 2, rows, D, c, 1.0, 0.02, 0, (N + 1) ** 2)[0]
    perms = np.array(list(itertools.permutations(range(2))), dtype=np.int64)

    def pan(k):
        return lambda: k.first_panchromatic(colours, N, 2, perms)

    vi, _ = reductions.polymatrix_to_linearvi(gallery.random_polymatrix(2, 3))
    inst, _ = reductions.linearvi_to_jc_minmax(vi, 1.0)
    obj = inst.objective
    r1, r2 = slice_interval_rows(inst.g1, 1), slice_interval_rows(inst.g2, 2)
    offs = ball_offsets(2, inst.delta / 6, inst.delta)

    def scan(k):
        # eps = -1 forces a full scan of the 100 x 100 grid
        return lambda: k.grid_scan(obj.M, obj.h, obj.k, 2, 100, r1, r2, inst.nu, offs, -1.0, 0)

    return [("colour 257^2 grid", colour), ("first panchromatic 256^2", pan), ("grid scan 101^2 x slices", scan)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = backends()
    names = list(impls)
    print(f"{'kernel':<28}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, make in cases():
        times = [_best(make(impls[n]), args.repeat) for n in names]
        line = f"{label:<28}" + "".join(f"{t:>11.4f}s" for t in times)
        if len(times) > 1:
            line += f"{times[0] / times[1]:>11.1f}x"
        print(line)
    if "cython" not in impls:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
