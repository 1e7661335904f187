# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; see ``sarcv._pykernels`` for the reference versions."""
import numpy as np
from libc.math cimport sqrt


def mild_recursion(const double[:, ::1] S, const double[:, ::1] inc, const double[::1] y0):
    """states[0] = y0, states[i] = S @ states[i-1] + inc[i-1]."""
    cdef Py_ssize_t n = inc.shape[0], d = inc.shape[1]
    cdef Py_ssize_t i, a, b
    cdef double acc
    if S.shape[0] != d or S.shape[1] != d or y0.shape[0] != d:
        raise ValueError("dimension mismatch in mild_recursion")
    out = np.empty((n + 1, d))
    cdef double[:, ::1] Y = out
    with nogil:
        for a in range(d):
            Y[0, a] = y0[a]
        for i in range(1, n + 1):
            for a in range(d):
                acc = 0.0
                for b in range(d):
                    acc = acc + S[a, b] * Y[i - 1, b]
                Y[i, a] = acc + inc[i - 1, a]
    return out


def sarcv_sup_error(const double[:, ::1] x, const double[:, :, ::1] q):
    """max_i || sum_{l<=i} (x_l x_l^T - q_l) ||_F over i = 0..n.

    ``q`` has n rows, or a single row that is reused for every step.
    """
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, a, b, qi
    cdef bint shared = q.shape[0] == 1
    cdef double s, v, best = 0.0
    if q.shape[1] != d or q.shape[2] != d or not (shared or q.shape[0] == n):
        raise ValueError("dimension mismatch in sarcv_sup_error")
    work = np.zeros((d, d))
    cdef double[:, ::1] D = work
    with nogil:
        for i in range(n):
            qi = 0 if shared else i
            s = 0.0
            for a in range(d):
                for b in range(d):
                    v = D[a, b] + x[i, a] * x[i, b] - q[qi, a, b]
                    D[a, b] = v
                    s = s + v * v
            s = sqrt(s)
            if s > best:
                best = s
    return best
