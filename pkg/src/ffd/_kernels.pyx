# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled triple-scoring kernels.

Embedding rows use a mixed layout: columns ``[0, n_scalar)`` are diagonal
entries, the remaining columns are (a, b) pairs of 2x2 blocks [[a, b], [-b, a]].
"""

from libc.stdint cimport int64_t


def score_triples(const double[:, ::1] ent, const double[:, ::1] rel,
                  const int64_t[::1] h, const int64_t[::1] r, const int64_t[::1] t,
                  Py_ssize_t n_scalar, double[::1] out):
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t d = ent.shape[1]
    cdef Py_ssize_t i, k
    cdef int64_t hi, ri, ti
    cdef double s, a, b, h1, h2, t1, t2
    with nogil:
        for i in range(n):
            hi = h[i]
            ri = r[i]
            ti = t[i]
            s = 0.0
            for k in range(n_scalar):
                s = s + ent[hi, k] * rel[ri, k] * ent[ti, k]
            k = n_scalar
            while k + 1 < d:
                a = rel[ri, k]
                b = rel[ri, k + 1]
                h1 = ent[hi, k]
                h2 = ent[hi, k + 1]
                t1 = ent[ti, k]
                t2 = ent[ti, k + 1]
                s = s + a * (h1 * t1 + h2 * t2) + b * (h1 * t2 - h2 * t1)
                k = k + 2
            out[i] = s


def accumulate_grads(const double[:, ::1] ent, const double[:, ::1] rel,
                     const int64_t[::1] h, const int64_t[::1] r, const int64_t[::1] t,
                     const double[::1] coef, Py_ssize_t n_scalar,
                     double[:, ::1] g_ent, double[:, ::1] g_rel):
    """Add ``coef[i] * d score_i / d theta`` into the dense gradient buffers."""
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t d = ent.shape[1]
    cdef Py_ssize_t i, k
    cdef int64_t hi, ri, ti
    cdef double c, a, b, h1, h2, t1, t2, hk, rk, tk
    with nogil:
        for i in range(n):
            c = coef[i]
            if c == 0.0:
                continue
            hi = h[i]
            ri = r[i]
            ti = t[i]
            for k in range(n_scalar):
                hk = ent[hi, k]
                rk = rel[ri, k]
                tk = ent[ti, k]
                g_ent[hi, k] += c * rk * tk
                g_ent[ti, k] += c * hk * rk
                g_rel[ri, k] += c * hk * tk
            k = n_scalar
            while k + 1 < d:
                a = rel[ri, k]
                b = rel[ri, k + 1]
                h1 = ent[hi, k]
                h2 = ent[hi, k + 1]
                t1 = ent[ti, k]
                t2 = ent[ti, k + 1]
                g_ent[hi, k] += c * (a * t1 + b * t2)
                g_ent[hi, k + 1] += c * (a * t2 - b * t1)
                g_ent[ti, k] += c * (a * h1 - b * h2)
                g_ent[ti, k + 1] += c * (b * h1 + a * h2)
                g_rel[ri, k] += c * (h1 * t1 + h2 * t2)
                g_rel[ri, k + 1] += c * (h1 * t2 - h2 * t1)
                k = k + 2
