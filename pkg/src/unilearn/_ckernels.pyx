# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled point-cloud kernels.

Every routine mirrors ``unilearn._pykernels`` operation for operation, so the
two backends agree bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor

cnp.import_array()

# see _pykernels.EDGE
cdef double EDGE = 1.0 - 1e-12


def hat_values(const double[:, ::1] X, const double[::1] y, double M, Py_ssize_t s):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc, a
    cdef bint inside
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        acc = 0.0
        inside = True
        for j in range(s):
            a = M * fabs(X[i, j] - y[j])
            if not a < EDGE:
                inside = False
                break
            acc = acc + (1.0 - a)
        if inside:
            acc = acc - <double>(s - 1)
            if acc > 0.0:
                o[i] = acc
    return out


cdef inline Py_ssize_t _cell(double x, Py_ssize_t K) nogil:
    cdef Py_ssize_t idx = <Py_ssize_t>floor(x * K)
    if idx < 0:
        return 0
    if idx > K - 1:
        return K - 1
    if idx + 1 <= K - 1 and x >= (<double>(idx + 1)) / K:
        return idx + 1
    if idx > 0 and x < (<double>idx) / K:
        return idx - 1
    return idx


def grid_cells(const double[:, ::1] X, Py_ssize_t K):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t i, j, flat
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    for i in range(n):
        flat = 0
        for j in range(d):
            flat = flat * K + _cell(X[i, j], K)
        o[i] = flat
    return out


def touched_cells(const double[:, ::1] X, Py_ssize_t k, Py_ssize_t s):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t side = 4 * k
    cdef double M = 8.0 * k
    cdef Py_ssize_t total = 1
    cdef Py_ssize_t i, j, t, base, c, n_combo, rem, flat
    cdef double centre
    cdef bint ok
    for j in range(s):
        total *= side
    mask = np.zeros(total, dtype=np.bool_)
    cdef cnp.npy_bool[::1] m = mask
    cand = np.zeros((s, 3), dtype=np.int64)
    ncand = np.zeros(s, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] cv = cand
    cdef cnp.int64_t[::1] nc = ncand
    for i in range(n):
        ok = True
        for j in range(s):
            nc[j] = 0
            base = <Py_ssize_t>floor(X[i, j] * side) + 1
            for t in range(base - 1, base + 2):
                if t < 1 or t > side:
                    continue
                centre = (2.0 * t - 1.0) / (8.0 * k)
                if M * fabs(X[i, j] - centre) < EDGE:
                    cv[j, nc[j]] = t - 1
                    nc[j] += 1
            if nc[j] == 0:
                ok = False
                break
        if not ok:
            continue
        n_combo = 1
        for j in range(s):
            n_combo *= nc[j]
        for c in range(n_combo):
            rem = c
            flat = 0
            for j in range(s - 1, -1, -1):
                flat = flat + cv[j, rem % nc[j]] * _pow(side, s - 1 - j)
                rem = rem // nc[j]
            m[flat] = True
    return mask


cdef inline Py_ssize_t _pow(Py_ssize_t b, Py_ssize_t e) nogil:
    cdef Py_ssize_t r = 1
    while e > 0:
        r *= b
        e -= 1
    return r
