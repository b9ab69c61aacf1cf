"""Built-in systems and brute-force oracles.

``mri`` is the two-spin saturation problem: drive spin 1 to the origin
while keeping spin 2 as large as possible. The toys are small affine
systems on which every pattern can be enumerated.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .dynamics import AffineField, Box, Pattern, SwitchedSystem
from .errors import InvarianceViolation, RefusedError, ValidationError
from .grid import BOTTOM, StateGrid, SuccessorTable
from .synthesis import TerminalCost, distance_cost

ENUMERATION_CAP = 10**5


@dataclass(frozen=True)
class MriParameters:
    Omega_max: float = 202.95
    T11: float = 2.0
    T12: float = 0.3
    T21: float = 2.5
    T22: float = 2.5
    T_m: float = 26.17
    t_m: float = 2.0
    alpha: float = 0.99
    beta: float = 0.01
    tau: float = 1 / 250
    k: int = 215
    n_levels: int = 30

    @property
    def Gamma1(self):
        return 1 / (self.T12 * self.Omega_max)

    @property
    def gamma1(self):
        return 1 / (self.T11 * self.Omega_max)

    @property
    def Gamma2(self):
        return 1 / (self.T22 * self.Omega_max)

    @property
    def gamma2(self):
        return 1 / (self.T21 * self.Omega_max)

    @property
    def scale(self):
        """Common factor ``2 pi T_m t_m`` of all right-hand sides."""
        return 2 * math.pi * self.T_m * self.t_m

    @property
    def t_end(self):
        return self.k * self.tau

    def levels(self) -> np.ndarray:
        """Control values, uniformly spaced over ``[-1, 1]`` including both ends."""
        return np.linspace(-1.0, 1.0, self.n_levels)


@dataclass(eq=False)
class Benchmark:
    name: str
    system: SwitchedSystem
    cost: TerminalCost
    y0: np.ndarray
    k: int
    K: int
    extra: dict = field(default_factory=dict)

    def grid(self, K: int | None = None) -> StateGrid:
        return StateGrid(self.system.domain, self.K if K is None else K)


def mri_field(p: MriParameters, u2: float) -> AffineField:
    """Right-hand side for state ``(y1, z1, y2, z2)`` under control ``u2``."""
    s = p.scale
    A = s * np.array([
        [-p.Gamma1, -u2, 0.0, 0.0],
        [u2, -p.gamma1, 0.0, 0.0],
        [0.0, 0.0, -p.Gamma2, -u2],
        [0.0, 0.0, u2, -p.gamma2],
    ])
    b = s * np.array([0.0, p.gamma1, 0.0, p.gamma2])
    return AffineField(A, b)


def mri_cost(p: MriParameters) -> TerminalCost:
    """``alpha ||q1||^2 - beta ||q2 - q1||^2``; the reported metric is the contrast ``||q2||``."""
    a, b = p.alpha, p.beta

    def fn(Y):
        q1, q2 = Y[..., :2], Y[..., 2:4]
        return a * np.sum(q1 * q1, axis=-1) - b * np.sum((q2 - q1) ** 2, axis=-1)

    return TerminalCost(fn, f"mri-saturation(alpha={a!r},beta={b!r})",
                        metric=lambda y: float(np.linalg.norm(np.asarray(y)[2:4])), metric_label="contrast")


def build_mri(params: MriParameters | None = None, q2_0=(0.0, 1.0), q1_0=(0.0, 1.0), K: int = 10) -> Benchmark:
    p = params or MriParameters()
    levels = p.levels()
    system = SwitchedSystem(
        name="mri",
        domain=Box.cube(-1.0, 1.0, 4),
        modes=tuple(mri_field(p, float(u)) for u in levels),
        tau=p.tau,
        mode_values=tuple(float(u) for u in levels),
        params={"mri": {k: getattr(p, k) for k in p.__dataclass_fields__}},
    )
    y0 = np.array([*q1_0, *q2_0], dtype=float)
    return Benchmark("mri", system, mri_cost(p), y0, p.k, K, {"params": p})


def build_toy_1d(tau: float = 0.1, target: float = 0.05, k: int = 9, K: int = 51) -> Benchmark:
    """``y' = -y + u`` on ``[-1, 1]`` with ``u`` in ``{-1, 0, 1}``."""
    controls = (-1.0, 0.0, 1.0)
    system = SwitchedSystem(
        name="toy1d",
        domain=Box.cube(-1.0, 1.0, 1),
        modes=tuple(AffineField([[-1.0]], [u]) for u in controls),
        tau=tau,
        mode_values=controls,
    )
    return Benchmark("toy1d", system, distance_cost([target]), np.array([-0.8]), k, K)


def build_toy_2d(tau: float = 0.1, target=(0.3, -0.2), k: int = 8, K: int = 21) -> Benchmark:
    """Damped rotation ``y' = A y + b_u`` on ``[-1, 1]^2`` with two constant inputs."""
    A = [[-1.0, 0.5], [-0.5, -1.0]]
    inputs = ((-0.5, 0.0), (0.5, 0.0))
    system = SwitchedSystem(
        name="toy2d",
        domain=Box.cube(-1.0, 1.0, 2),
        modes=tuple(AffineField(A, b) for b in inputs),
        tau=tau,
        mode_values=(-0.5, 0.5),
    )
    return Benchmark("toy2d", system, distance_cost(target), np.array([0.7, 0.6]), k, K)


BENCHMARKS: dict[str, Callable[..., Benchmark]] = {
    "mri": build_mri,
    "toy1d": build_toy_1d,
    "toy2d": build_toy_2d,
}


def get_benchmark(name: str, **kwargs) -> Benchmark:
    try:
        builder = BENCHMARKS[name]
    except KeyError:
        raise ValidationError(f"unknown benchmark {name!r}; known: {sorted(BENCHMARKS)}") from None
    return builder(**kwargs)


@dataclass(eq=False)
class OracleInstance:
    table: SuccessorTable
    cost: TerminalCost
    k: int
    z0: int


def brute_force_optimal(instance: OracleInstance, cap: int = ENUMERATION_CAP):
    """Best pattern through the successor graph by exhaustive enumeration.

    Patterns are visited in lexicographic order and only a strictly better
    value replaces the incumbent, so ties go to the lexicographically
    smallest pattern.
    """
    table, k = instance.table, instance.k
    m = table.n_modes
    if m**k > cap:
        raise RefusedError(f"{m}^{k} patterns exceed the enumeration cap {cap}")
    centers_cost = instance.cost(table.grid.centers())
    entries = table.entries
    best_val, best = math.inf, None
    for pat in itertools.product(range(m), repeat=k):
        z = instance.z0
        for u in pat:
            z = entries[z, u]
            if z == BOTTOM:
                break
        else:
            val = centers_cost[z]
            if val < best_val:
                best_val, best = float(val), pat
    if best is None:
        raise InvarianceViolation(f"no admissible {k}-step pattern from cell {instance.z0}", cells=(instance.z0,))
    return Pattern(best, table.tau), best_val


def affine_flow(field: AffineField, t: float):
    """Exact flow map of ``y' = A y + b`` over time ``t`` as ``(Phi, c)`` with ``y(t) = Phi y0 + c``."""
    M = field.b.size
    aug = np.zeros((M + 1, M + 1))
    aug[:M, :M] = field.A
    aug[:M, M] = field.b
    E = expm(aug * t)
    return E[:M, :M], E[:M, M]


def exact_optimum(system: SwitchedSystem, cost: TerminalCost, k: int, y0, cap: int = ENUMERATION_CAP):
    """Optimal pattern for the exact (continuous-state) dynamics of an affine system.

    All ``m**k`` patterns are enumerated with matrix-exponential flows; the
    state is not snapped to any grid. Returns ``(Pattern, value)``.
    """
    m = system.n_modes
    if m**k > cap:
        raise RefusedError(f"{m}^{k} patterns exceed the enumeration cap {cap}")
    maps = [affine_flow(f, system.tau) for f in system.modes]
    finals = np.asarray(y0, dtype=float)[None, :]
    for _ in range(k):
        finals = np.concatenate([finals @ Phi.T + c for Phi, c in maps], axis=0)
    # row index is sum_j u_{j+1} m^j: the first step varies fastest
    vals = cost(finals)
    idx = np.arange(m**k)
    digits = [(idx // m**j) % m for j in range(k)]
    lex = np.zeros_like(idx)
    for j in range(k):
        lex = lex * m + digits[j]
    order = np.argsort(lex, kind="stable")
    best_row = order[np.argmin(vals[order])]
    modes = tuple(int(digits[j][best_row]) for j in range(k))
    return Pattern(modes, system.tau), float(vals[best_row])
