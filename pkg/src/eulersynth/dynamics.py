"""Switched systems, explicit Euler simulation and a reference integrator.

A switched system is a finite family of vector fields ``f_u`` over a box,
one per mode ``u``. Controls are piecewise constant over steps of length
``tau``; each step may be split into several Euler sub-steps.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .errors import NumericalDomainError, OracleFailure, ValidationError


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned closed box ``[lo, hi]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValidationError("box bounds must be non-empty vectors of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or not np.all(lo < hi):
            raise ValidationError(f"box requires finite lo < hi componentwise, got lo={lo}, hi={hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Box":
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, y) -> np.ndarray | bool:
        y = np.asarray(y, dtype=float)
        res = np.all((self.lo <= y) & (y <= self.hi), axis=-1)
        return bool(res) if res.ndim == 0 else res

    def vertices(self) -> np.ndarray:
        bits = (np.arange(2**self.dim)[:, None] >> np.arange(self.dim)) & 1
        return np.where(bits == 1, self.hi, self.lo)

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))


class VectorField:
    """Right-hand side ``f(y, w)`` of one mode.

    ``__call__`` accepts a single state of shape ``(M,)`` or a batch of shape
    ``(n, M)``; ``w`` defaults to the zero disturbance.
    """

    disturbance_dim = 0

    def __call__(self, y, w=None) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        """JSON-serialisable description used for content hashing."""
        raise NotImplementedError


class AffineField(VectorField):
    """``f(y, w) = A y + b + D w``."""

    def __init__(self, A, b, D=None):
        self.A = np.array(A, dtype=float, ndmin=2)
        self.b = np.array(b, dtype=float).reshape(-1)
        M = self.b.size
        if self.A.shape != (M, M):
            raise ValidationError(f"A must be {M}x{M}, got {self.A.shape}")
        self.D = None if D is None else np.array(D, dtype=float).reshape(M, -1)
        self.disturbance_dim = 0 if self.D is None else self.D.shape[1]

    def __call__(self, y, w=None):
        y = np.asarray(y, dtype=float)
        out = y @ self.A.T + self.b
        if w is not None and self.D is not None:
            out = out + np.asarray(w, dtype=float) @ self.D.T
        return out

    def params(self):
        p = {"kind": "affine", "A": self.A.tolist(), "b": self.b.tolist()}
        if self.D is not None:
            p["D"] = self.D.tolist()
        return p

    def __repr__(self):
        return f"AffineField(A={self.A.tolist()}, b={self.b.tolist()})"


class CallableField(VectorField):
    """Wraps a batch-capable python function ``fn(y, w) -> dy``.

    ``params`` must identify the function for hashing; two fields with equal
    params are assumed to compute the same thing.
    """

    def __init__(self, fn: Callable, params: dict, disturbance_dim: int = 0):
        self.fn = fn
        self._params = dict(params)
        self.disturbance_dim = disturbance_dim

    def __call__(self, y, w=None):
        y = np.asarray(y, dtype=float)
        if w is None and self.disturbance_dim:
            w = np.zeros(y.shape[:-1] + (self.disturbance_dim,))
        return np.asarray(self.fn(y, w), dtype=float)

    def params(self):
        return {"kind": "callable", **self._params}


@dataclass(frozen=True, eq=False)
class SwitchedSystem:
    name: str
    domain: Box
    modes: tuple
    tau: float
    mode_values: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ValidationError("a switched system needs at least one mode")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValidationError(f"tau must be positive, got {self.tau}")
        dims = {f.disturbance_dim for f in modes}
        if len(dims) != 1:
            raise ValidationError("all modes must share the disturbance dimension")
        object.__setattr__(self, "modes", modes)
        values = tuple(self.mode_values) if self.mode_values else tuple(float(i) for i in range(len(modes)))
        if len(values) != len(modes):
            raise ValidationError("mode_values must have one entry per mode")
        object.__setattr__(self, "mode_values", values)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def disturbance_dim(self) -> int:
        return self.modes[0].disturbance_dim

    def check_mode(self, u) -> int:
        if isinstance(u, (bool, np.bool_)) or not isinstance(u, (int, np.integer)) or not 0 <= u < self.n_modes:
            raise ValidationError(f"invalid mode {u!r} for system with {self.n_modes} modes")
        return int(u)

    def describe(self) -> dict:
        """Everything that determines the dynamics, for hashing."""
        return {
            "name": self.name,
            "lo": self.domain.lo.tolist(),
            "hi": self.domain.hi.tolist(),
            "tau": self.tau,
            "modes": [f.params() for f in self.modes],
            "params": self.params,
        }


@dataclass(frozen=True, eq=False)
class Pattern:
    """A finite mode sequence applied with time step ``tau``."""

    modes: tuple
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(u) for u in self.modes))

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    def __add__(self, other: "Pattern") -> "Pattern":
        if other.tau != self.tau:
            raise ValidationError("cannot concatenate patterns with different tau")
        return Pattern(self.modes + other.modes, self.tau)

    def __eq__(self, other):
        return isinstance(other, Pattern) and self.modes == other.modes and self.tau == other.tau

    def __hash__(self):
        return hash((self.modes, self.tau))

    def __repr__(self):
        return f"Pattern(len={len(self)}, tau={self.tau}, modes={list(self.modes)})"


@dataclass(eq=False)
class Trajectory:
    """Piecewise linear path through Euler (or reference) points.

    ``segment_index[n]`` is the row of the state at ``t = n * tau``; the
    point at ``t = n * tau`` belongs to segment ``n`` (the one ending there).
    """

    times: np.ndarray
    states: np.ndarray
    controls: tuple
    tau: float
    segment_index: np.ndarray
    contained: bool = True
    exit_time: float | None = None

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    @property
    def segment_states(self) -> np.ndarray:
        """States at ``t = 0, tau, ..., k tau``."""
        return self.states[self.segment_index]

    def row_modes(self) -> list:
        """Mode of the segment each row belongs to (first segment for ``t = 0``)."""
        if not self.controls:
            return [None] * len(self.times)
        seg = np.searchsorted(self.segment_index, np.arange(len(self.times)), side="left")
        seg = np.clip(seg, 1, len(self.controls))
        return [self.controls[s - 1] for s in seg]

    def to_csv(self, path) -> None:
        M = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"y{i + 1}" for i in range(M)] + ["mode"])
            for t, y, u in zip(self.times, self.states, self.row_modes()):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in y] + ["" if u is None else u])


def _check_finite(values, u, y):
    if not np.all(np.isfinite(values)):
        raise NumericalDomainError(f"non-finite vector field value for mode {u} at state {np.asarray(y).tolist()}")


def euler_step(system: SwitchedSystem, y, u: int, dt: float) -> np.ndarray:
    """One explicit Euler step ``y + dt * f_u(y)`` with zero disturbance."""
    u = system.check_mode(u)
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise ValidationError(f"state must be finite, got {y.tolist()}")
    f = system.modes[u]
    if isinstance(f, AffineField):
        out = kernels.euler_affine_record(y, f.A, f.b, dt, 1)[1]
    else:
        fy = f(y)
        _check_finite(fy, u, y)
        out = y + dt * fy
    _check_finite(out, u, y)
    return out


def _substeps_for(substeps, u: int) -> int:
    n = substeps if isinstance(substeps, (int, np.integer)) else substeps[u]
    n = int(n)
    if n < 1:
        raise ValidationError(f"substep count must be >= 1, got {n}")
    return n


def euler_segment(system: SwitchedSystem, y, u: int, nsteps: int) -> np.ndarray:
    """All ``nsteps + 1`` sub-step points of one ``tau`` segment under mode ``u``."""
    f = system.modes[u]
    dt = system.tau / nsteps
    y = np.asarray(y, dtype=float).reshape(-1)
    if isinstance(f, AffineField):
        pts = kernels.euler_affine_record(y, f.A, f.b, dt, nsteps)
    else:
        pts = np.empty((nsteps + 1, y.size))
        pts[0] = y
        for s in range(nsteps):
            fy = f(pts[s])
            _check_finite(fy, u, pts[s])
            pts[s + 1] = pts[s] + dt * fy
    _check_finite(pts, u, y)
    return pts


def advance_batch(system: SwitchedSystem, Y, u: int, nsteps: int, strict: bool = False):
    """Advance many states through one ``tau`` segment under mode ``u``.

    Returns ``(end_points, stayed_inside)``; the mask tracks intermediate
    sub-step points only when ``strict`` is set.
    """
    f = system.modes[u]
    dt = system.tau / nsteps
    Y = np.asarray(Y, dtype=float)
    lo, hi = system.domain.lo, system.domain.hi
    if isinstance(f, AffineField):
        return kernels.euler_affine_batch(Y, f.A, f.b, dt, nsteps, lo, hi, strict)
    inside = np.ones(Y.shape[0], dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(nsteps):
            Y = Y + dt * f(Y)
            if strict:
                inside &= system.domain.contains(Y)
    return Y, inside


def simulate_pattern(system: SwitchedSystem, y0, pattern: Pattern, substeps=1, bounds: Box | None = None) -> Trajectory:
    """Euler trajectory of ``pattern`` from ``y0``.

    ``substeps`` is either one count for every segment or a per-mode
    sequence. If ``bounds`` is given, leaving it only flags the trajectory.
    """
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    if y0.size != system.dim:
        raise ValidationError(f"initial state has dimension {y0.size}, system has {system.dim}")
    if pattern.tau != system.tau:
        raise ValidationError(f"pattern tau {pattern.tau} differs from system tau {system.tau}")
    chunks = [y0[None, :]]
    times = [np.zeros(1)]
    seg_idx = [0]
    y = y0
    for n, u in enumerate(pattern.modes):
        u = system.check_mode(u)
        ns = _substeps_for(substeps, u)
        pts = euler_segment(system, y, u, ns)
        chunks.append(pts[1:])
        times.append(n * system.tau + np.arange(1, ns + 1) * (system.tau / ns))
        seg_idx.append(seg_idx[-1] + ns)
        y = pts[-1]
    states = np.concatenate(chunks)
    t = np.concatenate(times)
    contained, exit_time = True, None
    if bounds is not None:
        ok = bounds.contains(states)
        if not np.all(ok):
            contained = False
            exit_time = float(t[np.argmin(ok)])
    return Trajectory(t, states, tuple(pattern.modes), system.tau, np.asarray(seg_idx), contained, exit_time)


def reference_solve(system: SwitchedSystem, y0, pattern: Pattern, tol: float = 1e-10,
                    samples_per_segment: int = 1, disturbance: Callable | None = None) -> Trajectory:
    """High-order adaptive solution of the piecewise system (testing oracle).

    Each ``tau`` segment is integrated separately with DOP853 at
    ``rtol = atol = tol``. States are reported at ``samples_per_segment``
    equally spaced points inside every segment (the last one at its end).
    ``disturbance`` is an optional function ``t -> w``.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    y = np.asarray(y0, dtype=float).reshape(-1)
    tau = system.tau
    times, states, seg_idx = [0.0], [y.copy()], [0]
    for n, u in enumerate(pattern.modes):
        u = system.check_mode(u)
        f = system.modes[u]
        t0 = n * tau
        if disturbance is None:
            rhs = lambda t, x, f=f: f(x)
        else:
            rhs = lambda t, x, f=f: f(x, np.asarray(disturbance(t), dtype=float))
        local = tau * np.arange(1, samples_per_segment + 1) / samples_per_segment
        sol = solve_ivp(rhs, (t0, t0 + tau), y, method="DOP853", rtol=tol, atol=tol, t_eval=t0 + local)
        if sol.status != 0 or sol.y.shape[1] != samples_per_segment:
            raise OracleFailure(f"reference integration failed on segment {n + 1} (mode {u}): {sol.message}")
        for j in range(samples_per_segment):
            times.append(t0 + local[j])
            states.append(sol.y[:, j].copy())
        y = sol.y[:, -1].copy()
        seg_idx.append(len(states) - 1)
    return Trajectory(np.asarray(times), np.asarray(states), tuple(pattern.modes), tau, np.asarray(seg_idx))
