"""Pure-Python (numpy) versions of the hot kernels.

Mirrors ``_ckernels.pyx`` function by function. Used when the compiled
extension is unavailable or when ``RISKCLT_PURE_PYTHON=1`` is set.
"""
import numpy as np

MAX_ITER = 500


def pairwise_sum(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    # numpy's add.reduce on a contiguous 1-D array is pairwise summation
    return float(np.add.reduce(a))


def tail_moment(xs, z, p):
    """(1/n) * sum(max(0, x - z)**p) for an ascending-sorted ``xs``."""
    n = xs.shape[0]
    start = int(np.searchsorted(xs, z, side="right"))
    if start >= n:
        return 0.0
    t = xs[start:] - z
    if p == 1.0:
        pass
    elif p == 2.0:
        t = t * t
    else:
        t = t ** p
    return float(np.add.reduce(t)) / n


def tail_objective(xs, z, p, c):
    m = tail_moment(xs, z, p)
    if p == 1.0:
        return z + c * m
    return z + c * m ** (1.0 / p)


def ternary_tail(xs, p, c, lo, hi, tol):
    """Ternary search for the minimum of z + c * tail_moment(z)**(1/p).

    Returns ``(z, value, iterations, status)``; ``status`` is 0 on success
    and 1 if a non-finite objective value was met.
    """
    it = 0
    while hi - lo > tol and it < MAX_ITER:
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        if not (lo < m1 < m2 < hi):
            break
        f1 = tail_objective(xs, m1, p, c)
        f2 = tail_objective(xs, m2, p, c)
        if not (np.isfinite(f1) and np.isfinite(f2)):
            return 0.5 * (lo + hi), float("nan"), it, 1
        if f1 <= f2:
            hi = m2
        else:
            lo = m1
        it += 1
    z = 0.5 * (lo + hi)
    val = tail_objective(xs, z, p, c)
    if not np.isfinite(val):
        return z, val, it, 1
    return z, val, it, 0

