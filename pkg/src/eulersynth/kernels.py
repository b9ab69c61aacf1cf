"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy
fallback is used. Set ``EULERSYNTH_BACKEND=python`` to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

_requested = os.environ.get("EULERSYNTH_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"EULERSYNTH_BACKEND={_requested!r} is not available; have {sorted(BACKENDS)}")
BACKEND = _requested or ("compiled" if _ckernels is not None else "python")


def get_backend(name=None):
    return BACKENDS[name or BACKEND]


def _policy_dtype(m):
    return np.int8 if m <= 127 else np.int16


def euler_affine_batch(Y, A, b, dt, nsteps, lo, hi, strict=False, backend=None):
    """Advance every row of ``Y`` by ``nsteps`` Euler steps of ``y' = A y + b``.

    Returns the final points and a mask telling whether all intermediate
    points stayed in ``[lo, hi]`` (always true unless ``strict``).
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    out, inside = get_backend(backend).euler_affine_batch(Y, A, b, float(dt), int(nsteps), lo, hi, bool(strict))
    return np.asarray(out), np.asarray(inside, dtype=bool)


def euler_affine_record(y0, A, b, dt, nsteps, backend=None):
    """All ``nsteps + 1`` Euler points of a single trajectory."""
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return np.asarray(get_backend(backend).euler_affine_record(y0, A, b, float(dt), int(nsteps)))


def value_iteration(succ, v0, k, backend=None):
    """Backward min-recursion over a successor table.

    ``succ`` is ``(N, m)`` with ``-1`` for inadmissible modes. Returns the
    value after ``k`` steps and a ``(k, N)`` policy whose row ``j`` holds the
    lowest-index argmin for horizon ``j + 1``; ``-1`` marks cells without any
    finite-valued successor.
    """
    succ = np.ascontiguousarray(succ, dtype=np.int32)
    v0 = np.ascontiguousarray(v0, dtype=np.float64)
    v, policy = get_backend(backend).value_iteration(succ, v0, int(k), _policy_dtype(succ.shape[1]))
    return np.asarray(v), np.asarray(policy)
