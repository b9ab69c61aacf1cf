"""Pure numpy versions of the compiled kernels.

Every floating point operation is performed in the same order as in
``_ckernels.pyx`` so both backends return bit-identical arrays.
"""
import numpy as np


def _nonzero_columns(A):
    # zero terms are skipped, matching the compiled kernel
    return [[j for j in range(A.shape[1]) if A[i, j] != 0.0] for i in range(A.shape[0])]


def _affine_rhs(Y, A, b, cols):
    F = np.empty_like(Y)
    for i, nz in enumerate(cols):
        if not nz:
            F[:, i] = 0.0 + b[i]
            continue
        acc = A[i, nz[0]] * Y[:, nz[0]]
        for j in nz[1:]:
            acc = acc + A[i, j] * Y[:, j]
        F[:, i] = acc + b[i]
    return F


def euler_affine_batch(Y, A, b, dt, nsteps, lo, hi, strict):
    Y = np.array(Y, dtype=np.float64, copy=True)
    inside = np.ones(Y.shape[0], dtype=bool)
    cols = _nonzero_columns(A)
    for _ in range(nsteps):
        Y = Y + dt * _affine_rhs(Y, A, b, cols)
        if strict:
            inside &= np.all((lo <= Y) & (Y <= hi), axis=1)
    return Y, inside


def euler_affine_record(y0, A, b, dt, nsteps):
    M = len(y0)
    terms = [[(j, float(A[i, j])) for j in nz] for i, nz in enumerate(_nonzero_columns(A))]
    off = [float(v) for v in b]
    y = [float(v) for v in y0]
    out = np.empty((nsteps + 1, M))
    out[0] = y
    for s in range(nsteps):
        f = []
        for i in range(M):
            row = terms[i]
            if not row:
                f.append(0.0 + off[i])
                continue
            j, a = row[0]
            acc = a * y[j]
            for j, a in row[1:]:
                acc = acc + a * y[j]
            f.append(acc + off[i])
        y = [y[i] + dt * f[i] for i in range(M)]
        out[s + 1] = y
    return out


def value_iteration(succ, v0, k, policy_dtype):
    N = succ.shape[0]
    valid = succ >= 0
    safe = np.where(valid, succ, 0)
    rows = np.arange(N)
    v = np.array(v0, dtype=np.float64, copy=True)
    policy = np.empty((k, N), dtype=policy_dtype)
    for j in range(k):
        vals = np.where(valid, v[safe], np.inf)
        arg = np.argmin(vals, axis=1) if N else np.zeros(0, dtype=np.intp)
        best = vals[rows, arg] if N else np.zeros(0)
        dead = ~(best < np.inf)
        arg[dead] = -1
        best[dead] = np.inf
        policy[j] = arg
        v = best
    return v, policy
