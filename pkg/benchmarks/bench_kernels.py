#!/usr/bin/env python
"""Compare the jitted kernels against their pure-numpy fallbacks.

Run: python benchmarks/bench_kernels.py [--repeats 3]
The jitted path warms up once before timing so compilation is excluded.
"""

import argparse
import time

import numpy as np

from concon import _kernels


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not _kernels.USE_NUMBA:
        raise SystemExit("jit path disabled (CONCON_DISABLE_NUMBA is set); "
                         "nothing to compare")

    rng = np.random.default_rng(0)
    sample = np.sort(rng.integers(0, 96, size=(200_000, 4)), axis=1).astype(np.int64)

    cases = [
        ("build_type_table", _kernels.build_type_table, ()),
        ("presence_masks", None, None),  # filled in below, needs the table
        ("rank_scenes", _kernels.rank_scenes, (sample,)),
    ]
    table = _kernels.build_type_table()
    cases[1] = ("presence_masks", _kernels.presence_masks, (table,))

    print(f"{'kernel':<20} {'jit (s)':>10} {'numpy (s)':>10} {'speedup':>8}")
    for name, jit_fn, fn_args in cases:
        jit_fn(*fn_args)  # warm-up: trigger compilation
        t_jit, out_jit = _time(jit_fn, *fn_args, repeats=args.repeats)
        np_fn = _kernels.numpy_impls[name]
        t_np, out_np = _time(np_fn, *fn_args, repeats=args.repeats)
        for a, b in zip(np.atleast_1d(out_jit), np.atleast_1d(out_np)):
            assert np.array_equal(a, b), f"{name}: jit and numpy outputs differ"
        print(f"{name:<20} {t_jit:>10.4f} {t_np:>10.4f} {t_np / t_jit:>7.1f}x")


if __name__ == "__main__":
    main()
