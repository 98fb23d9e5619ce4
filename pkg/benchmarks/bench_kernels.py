"""Compare the compiled and numpy kernels on the higher-order solve.

    python benchmarks/bench_kernels.py [--n 4000] [--reps 200]
"""
import argparse
import timeit

import numpy as np

from riskclt import _pykernels
from riskclt.measures import hmcr_bracket

try:
    from riskclt import _ckernels
except ImportError:
    _ckernels = None


def solve(mod, xs, p, c):
    lo, hi = hmcr_bracket(xs, c)
    tol = 1e-9 * (1.0 + max(abs(lo), abs(hi)))
    return mod.ternary_tail(xs, p, c, lo, hi, tol)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--c", type=float, default=20.0)
    a = ap.parse_args()
    xs = np.sort(np.random.default_rng(0).normal(10.0, np.sqrt(3.0), a.n))
    mods = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    base = None
    for name, mod in mods:
        t = min(timeit.repeat(lambda: solve(mod, xs, a.p, a.c), number=a.reps, repeat=3)) / a.reps
        z = solve(mod, xs, a.p, a.c)[0]
        base = base or t
        print(f"{name:7s} {t * 1e3:9.3f} ms/solve  speedup {base / t:6.1f}x  z={z:.12g}")
    if _ckernels is None:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
