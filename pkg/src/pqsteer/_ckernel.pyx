# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same API as ``_pykernel``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def kron(a, b):
    cdef const double complex[:, ::1] A = np.ascontiguousarray(a, dtype=np.complex128)
    cdef const double complex[:, ::1] B = np.ascontiguousarray(b, dtype=np.complex128)
    cdef Py_ssize_t ra = A.shape[0], ca = A.shape[1], rb = B.shape[0], cb = B.shape[1]
    out = np.empty((ra * rb, ca * cb), dtype=np.complex128)
    cdef double complex[:, ::1] O = out
    cdef Py_ssize_t i, j, k, l
    cdef double complex aij
    for i in range(ra):
        for j in range(ca):
            aij = A[i, j]
            for k in range(rb):
                for l in range(cb):
                    O[i * rb + k, j * cb + l] = aij * B[k, l]
    return out


def trace_product(a, b):
    cdef const double complex[:, ::1] A = np.ascontiguousarray(a, dtype=np.complex128)
    cdef const double complex[:, ::1] B = np.ascontiguousarray(b, dtype=np.complex128)
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i, j
    cdef double complex acc = 0
    for i in range(n):
        for j in range(m):
            acc += A[i, j] * B[j, i]
    return complex(acc)


def batched_trace_product(a, b):
    cdef const double complex[:, :, ::1] A = np.ascontiguousarray(a, dtype=np.complex128)
    cdef const double complex[:, :, ::1] B = np.ascontiguousarray(b, dtype=np.complex128)
    cdef Py_ssize_t K = A.shape[0], n = A.shape[1], m = A.shape[2], k, i, j
    cdef double complex acc = 0
    for k in range(K):
        for i in range(n):
            for j in range(m):
                acc += A[k, i, j] * B[k, j, i]
    return complex(acc)


def ptrace_pair(m, Py_ssize_t da, Py_ssize_t db, bint keep_first):
    cdef const double complex[:, ::1] M = np.ascontiguousarray(m, dtype=np.complex128)
    if keep_first:
        out = np.empty((da, da), dtype=np.complex128)
        _ptrace_keep_first(M, out, da, db)
    else:
        out = np.empty((db, db), dtype=np.complex128)
        _ptrace_keep_second(M, out, da, db)
    return out


cdef void _ptrace_keep_first(const double complex[:, ::1] M, double complex[:, ::1] O,
                             Py_ssize_t da, Py_ssize_t db) noexcept nogil:
    cdef Py_ssize_t i, k, j
    cdef double complex acc
    for i in range(da):
        for k in range(da):
            acc = 0
            for j in range(db):
                acc = acc + M[i * db + j, k * db + j]
            O[i, k] = acc


cdef void _ptrace_keep_second(const double complex[:, ::1] M, double complex[:, ::1] O,
                              Py_ssize_t da, Py_ssize_t db) noexcept nogil:
    cdef Py_ssize_t i, j, l
    cdef double complex acc
    for j in range(db):
        for l in range(db):
            acc = 0
            for i in range(da):
                acc = acc + M[i * db + j, i * db + l]
            O[j, l] = acc


def correlator_max(coeffs):
    """Exact max of sum_zw c[z,w] s_z t_w over every s, t in {-1,+1}.

    Walks all 2**(nz+nw) joint assignments; the inner loop visits t in
    Gray-code order so each step updates the sum in O(1).
    """
    cdef const double[:, ::1] C = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t nz = C.shape[0], nw = C.shape[1]
    cdef double[::1] v = np.empty(nw, dtype=np.float64)
    cdef double[::1] t = np.empty(nw, dtype=np.float64)
    cdef double best
    with nogil:
        best = _correlator_max(C, v, t, nz, nw)
    return best


cdef double _correlator_max(const double[:, ::1] C, double[::1] v, double[::1] t,
                            Py_ssize_t nz, Py_ssize_t nw) noexcept nogil:
    cdef long s, k, ns = 1 << nz, nt = 1 << nw
    cdef Py_ssize_t z, w
    cdef double total, best = -1e300, sz
    for s in range(ns):
        for w in range(nw):
            v[w] = 0.0
            t[w] = 1.0
        for z in range(nz):
            sz = -1.0 if (s >> z) & 1 else 1.0
            for w in range(nw):
                v[w] += sz * C[z, w]
        total = 0.0
        for w in range(nw):
            total += v[w]
        if total > best:
            best = total
        for k in range(1, nt):
            w = 0
            while not (k >> w) & 1:
                w += 1
            t[w] = -t[w]
            total += 2.0 * t[w] * v[w]
            if total > best:
                best = total
    return best
