"""Time the numba and numpy versions of the light-cone loops.

Usage: ``python3 benchmarks/bench_accel.py [--sizes 32,64,128] [--repeat 3]``

Both backends are imported directly, so ``KGLAB_DISABLE_NUMBA`` does not
matter here.  The first numba call (compilation or cache load) is excluded.
"""
import argparse
import time

import numpy as np

from kglab import _hot


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--sizes", default="32,64,128", help="comma-separated time steps n_t (grid is n_t x 3 n_t)")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22s}{'n_t':>6s}{'numpy [s]':>12s}{'numba [s]':>12s}{'speedup':>10s}{'max diff':>11s}")
    for n_t in (int(s) for s in args.sizes.split(",")):
        n_x = 3 * n_t
        d = 1.0 / n_t
        cells = rng.normal(size=(n_t, n_x - 1))
        v = rng.normal(size=(n_t + 1, n_x))
        cases = [
            ("cone_sums", lambda f: f(cells, n_x, 1.0, d), _hot.cone_sums_numpy, _hot.cone_sums_numba),
            ("light_cone_integral", lambda f: f(v, 1.0, d), _hot.light_cone_integral_numpy,
             _hot.light_cone_integral_numba),
        ]
        for name, call, f_np, f_nb in cases:
            ref = call(f_np)
            diff = float(np.abs(call(f_nb) - ref).max())
            t_np = best_time(lambda: call(f_np), args.repeat)
            t_nb = best_time(lambda: call(f_nb), args.repeat)
            print(f"{name:<22s}{n_t:>6d}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
