# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Arithmetic order mirrors ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

DEF MAXDIM = 64


DEF BLOCK = 256


cdef int _sparsity(const double[:, ::1] A, int* cols, int* counts) noexcept nogil:
    # nonzero column indices of each row of A; zero terms are skipped
    cdef Py_ssize_t M = A.shape[0], i, j
    for i in range(M):
        counts[i] = 0
        for j in range(M):
            if A[i, j] != 0.0:
                cols[i * MAXDIM + counts[i]] = <int>j
                counts[i] += 1
    return 0


def euler_affine_batch(const double[:, ::1] Y, const double[:, ::1] A,
                       const double[::1] b, double dt, Py_ssize_t nsteps,
                       const double[::1] lo, const double[::1] hi, bint strict):
    cdef Py_ssize_t n = Y.shape[0], M = Y.shape[1]
    if M > MAXDIM:
        raise ValueError("state dimension exceeds compiled kernel limit")
    out = np.empty((n, M), dtype=np.float64)
    inside = np.ones(n, dtype=np.bool_)
    cdef double[:, ::1] O = out
    cdef cnp.npy_bool[::1] ins = inside
    cdef double y[MAXDIM][BLOCK]
    cdef double f[MAXDIM][BLOCK]
    cdef bint ok[BLOCK]
    cdef int cols[MAXDIM * MAXDIM]
    cdef int counts[MAXDIM]
    cdef double a, bi
    cdef Py_ssize_t p0, p, nb, s, i, j, c
    with nogil:
        _sparsity(A, cols, counts)
        for p0 in range(0, n, BLOCK):
            nb = min(BLOCK, n - p0)
            for p in range(nb):
                ok[p] = True
                for i in range(M):
                    y[i][p] = Y[p0 + p, i]
            for s in range(nsteps):
                for i in range(M):
                    bi = b[i]
                    if counts[i] == 0:
                        for p in range(nb):
                            f[i][p] = 0.0 + bi
                        continue
                    j = cols[i * MAXDIM]
                    a = A[i, j]
                    for p in range(nb):
                        f[i][p] = a * y[j][p]
                    for c in range(1, counts[i]):
                        j = cols[i * MAXDIM + c]
                        a = A[i, j]
                        for p in range(nb):
                            f[i][p] = f[i][p] + a * y[j][p]
                    for p in range(nb):
                        f[i][p] = f[i][p] + bi
                for i in range(M):
                    for p in range(nb):
                        y[i][p] = y[i][p] + dt * f[i][p]
                if strict:
                    for p in range(nb):
                        if ok[p]:
                            for i in range(M):
                                if not (lo[i] <= y[i][p] <= hi[i]):
                                    ok[p] = False
                                    break
            for p in range(nb):
                ins[p0 + p] = ok[p]
                for i in range(M):
                    O[p0 + p, i] = y[i][p]
    return out, inside


def euler_affine_record(const double[::1] y0, const double[:, ::1] A,
                        const double[::1] b, double dt, Py_ssize_t nsteps):
    cdef Py_ssize_t M = y0.shape[0]
    if M > MAXDIM:
        raise ValueError("state dimension exceeds compiled kernel limit")
    out = np.empty((nsteps + 1, M), dtype=np.float64)
    cdef double[:, ::1] O = out
    cdef double y[MAXDIM]
    cdef double f[MAXDIM]
    cdef int cols[MAXDIM * MAXDIM]
    cdef int counts[MAXDIM]
    cdef double acc
    cdef Py_ssize_t s, i, j, c
    for i in range(M):
        y[i] = y0[i]
        O[0, i] = y[i]
    with nogil:
        _sparsity(A, cols, counts)
        for s in range(nsteps):
            for i in range(M):
                if counts[i] == 0:
                    f[i] = 0.0 + b[i]
                    continue
                j = cols[i * MAXDIM]
                acc = A[i, j] * y[j]
                for c in range(1, counts[i]):
                    j = cols[i * MAXDIM + c]
                    acc = acc + A[i, j] * y[j]
                f[i] = acc + b[i]
            for i in range(M):
                y[i] = y[i] + dt * f[i]
                O[s + 1, i] = y[i]
    return out


def value_iteration(const int[:, ::1] succ, const double[::1] v0, Py_ssize_t k, policy_dtype):
    cdef Py_ssize_t N = succ.shape[0], m = succ.shape[1]
    a_arr = np.array(v0, dtype=np.float64, copy=True)
    b_arr = np.empty(N, dtype=np.float64)
    policy = np.empty((k, N), dtype=np.int16)
    cdef double[::1] a_view = a_arr
    cdef double[::1] b_view = b_arr
    cdef double* cur = &a_view[0] if N > 0 else NULL
    cdef double* nxt = &b_view[0] if N > 0 else NULL
    cdef double* tmp
    cdef short[:, ::1] pol = policy
    cdef Py_ssize_t j, z, u
    cdef int s
    cdef short arg
    cdef double best, val
    with nogil:
        for j in range(k):
            for z in range(N):
                best = INFINITY
                arg = -1
                for u in range(m):
                    s = succ[z, u]
                    if s >= 0:
                        val = cur[s]
                        if val < best:
                            best = val
                            arg = <short>u
                nxt[z] = best
                pol[j, z] = arg
            tmp = cur
            cur = nxt
            nxt = tmp
    result = a_arr if k % 2 == 0 else b_arr
    return result, policy.astype(policy_dtype, copy=False)
