# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contract as ``_pykernels``.

All loops run without the GIL so replicate workers on a thread pool
proceed in parallel.
"""
from libc.math cimport pow, isfinite, NAN

cdef int MAX_ITER = 500
cdef Py_ssize_t LEAF = 128


cdef inline double _term(double v, double p) noexcept nogil:
    if p == 1.0:
        return v
    if p == 2.0:
        return v * v
    return pow(v, p)


cdef double _tail_psum(const double[::1] xs, Py_ssize_t a, Py_ssize_t b,
                       double z, double p) noexcept nogil:
    # pairwise summation of (xs[i] - z)**p over [a, b)
    cdef Py_ssize_t i, mid
    cdef double s
    if b - a <= LEAF:
        s = 0.0
        for i in range(a, b):
            s += _term(xs[i] - z, p)
        return s
    mid = a + (b - a) // 2
    return _tail_psum(xs, a, mid, z, p) + _tail_psum(xs, mid, b, z, p)


cdef double _psum(const double[::1] xs, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef Py_ssize_t i, mid
    cdef double s
    if b - a <= LEAF:
        s = 0.0
        for i in range(a, b):
            s += xs[i]
        return s
    mid = a + (b - a) // 2
    return _psum(xs, a, mid) + _psum(xs, mid, b)


cdef Py_ssize_t _upper_bound(const double[::1] xs, double z) noexcept nogil:
    # first index with xs[i] > z
    cdef Py_ssize_t lo = 0, hi = xs.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if xs[mid] <= z:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef double _tail_moment(const double[::1] xs, double z, double p) noexcept nogil:
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t start = _upper_bound(xs, z)
    if start >= n:
        return 0.0
    return _tail_psum(xs, start, n, z, p) / n


cdef double _objective(const double[::1] xs, double z, double p, double c) noexcept nogil:
    cdef double m = _tail_moment(xs, z, p)
    if p == 1.0:
        return z + c * m
    return z + c * pow(m, 1.0 / p)


def pairwise_sum(a):
    cdef const double[::1] v = a
    cdef double s
    with nogil:
        s = _psum(v, 0, v.shape[0])
    return s


def tail_moment(xs, double z, double p):
    cdef const double[::1] v = xs
    cdef double m
    with nogil:
        m = _tail_moment(v, z, p)
    return m


def tail_objective(xs, double z, double p, double c):
    cdef const double[::1] v = xs
    cdef double f
    with nogil:
        f = _objective(v, z, p, c)
    return f


def ternary_tail(xs, double p, double c, double lo, double hi, double tol):
    cdef const double[::1] v = xs
    cdef int it = 0
    cdef int status = 0
    cdef double third, m1, m2, f1, f2, z, val
    with nogil:
        while hi - lo > tol and it < MAX_ITER:
            third = (hi - lo) / 3.0
            m1 = lo + third
            m2 = hi - third
            if not (lo < m1 and m1 < m2 and m2 < hi):
                break
            f1 = _objective(v, m1, p, c)
            f2 = _objective(v, m2, p, c)
            if not (isfinite(f1) and isfinite(f2)):
                status = 1
                break
            if f1 <= f2:
                hi = m2
            else:
                lo = m1
            it += 1
        z = 0.5 * (lo + hi)
        if status == 0:
            val = _objective(v, z, p, c)
            if not isfinite(val):
                status = 1
        else:
            val = NAN
    return z, val, it, status
