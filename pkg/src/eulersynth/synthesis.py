"""Backward dynamic programming over the grid graph and pattern extraction.

The value of a cell after ``j`` steps is the best terminal cost reachable
by walking ``j`` successor edges; the policy stores the lowest-index
minimising mode for every horizon, so the optimal pattern of any length
``j <= k`` can be read from it.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .bounds import CERTIFIED, check_hypothesis, system_constants
from .dynamics import Pattern, SwitchedSystem, Trajectory, reference_solve, simulate_pattern
from .errors import EulerSynthError, HypothesisViolation, InvarianceViolation, NumericalDomainError, ValidationError
from .grid import BOTTOM, StateGrid, SuccessorTable, build_successors

log = logging.getLogger(__name__)

NO_MODE = -1


@dataclass(frozen=True, eq=False)
class TerminalCost:
    """Cost of the final state. ``fn`` maps ``(n, M)`` states to ``(n,)`` costs.

    ``metric`` is an optional figure of merit reported alongside the cost
    (for instance a contrast that the cost trades off against a penalty).
    """

    fn: Callable
    label: str
    metric: Callable | None = None
    metric_label: str | None = None

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            return float(np.asarray(self.fn(y[None, :])).reshape(-1)[0])
        return np.asarray(self.fn(y), dtype=float).reshape(-1)

    def report_metric(self, y):
        return None if self.metric is None else float(self.metric(np.asarray(y, dtype=float)))


def distance_cost(target) -> TerminalCost:
    """``||y - target||``."""
    target = np.asarray(target, dtype=float)
    return TerminalCost(lambda Y: np.linalg.norm(Y - target, axis=-1), f"distance-to-{target.tolist()}")


@dataclass(eq=False)
class ValueTable:
    values: np.ndarray
    step: int


@dataclass(eq=False)
class PolicyTable:
    """``policy[j - 1, z]`` is the first mode of the optimal ``j``-step pattern from ``z``."""

    policy: np.ndarray
    cost_label: str
    grid_key: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.policy.shape[0]

    def first_mode(self, horizon: int, z: int) -> int:
        if not 1 <= horizon <= self.k:
            raise ValidationError(f"horizon {horizon} outside 1..{self.k}")
        return int(self.policy[horizon - 1, z])


def value_iteration(table: SuccessorTable, cost: TerminalCost, k: int, on_dead: str = "raise"):
    """Run ``k`` backward steps of the min-recursion.

    Returns ``(ValueTable, PolicyTable)``. Cells without an admissible mode
    raise :class:`InvarianceViolation` unless ``on_dead="mark"``, in which
    case they (and cells that can only reach them) get value ``inf`` and
    policy :data:`NO_MODE`.
    """
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise ValidationError(f"k must be a non-negative integer, got {k!r}")
    if on_dead not in ("raise", "mark"):
        raise ValidationError(f"on_dead must be 'raise' or 'mark', got {on_dead!r}")
    v0 = cost(table.grid.centers())
    if not np.all(np.isfinite(v0)):
        bad = int(np.flatnonzero(~np.isfinite(v0))[0])
        raise NumericalDomainError(f"terminal cost is not finite at the center of cell {bad}")
    if k > 0 and on_dead == "raise" and table.violations.size:
        cells = table.violations.tolist()
        raise InvarianceViolation(f"{len(cells)} cells have no admissible mode, first: {cells[:5]}", cells=cells)
    v, policy = kernels.value_iteration(table.entries, v0, int(k))
    return ValueTable(v, int(k)), PolicyTable(policy, cost.label)


def walk(policy: PolicyTable, table: SuccessorTable, z0: int):
    """Follow the policy from ``z0``; returns ``(modes, cells)`` with ``cells[0] == z0``."""
    z = int(z0)
    modes, cells = [], [z]
    for j in range(policy.k, 0, -1):
        u = policy.first_mode(j, z)
        if u == NO_MODE:
            raise InvarianceViolation(f"cell {z} cannot complete a {j}-step pattern", cells=(z,))
        nz = table.next(z, u)
        if nz == BOTTOM:
            raise EulerSynthError(f"policy chose inadmissible mode {u} at cell {z}; tables are inconsistent")
        modes.append(u)
        cells.append(nz)
        z = nz
    return modes, cells


def extract_pattern(policy: PolicyTable, table: SuccessorTable, z0: int) -> Pattern:
    """Approximate optimal pattern of length ``policy.k`` from cell ``z0``."""
    modes, _ = walk(policy, table, z0)
    return Pattern(modes, table.tau)


@dataclass(eq=False)
class Prepared:
    """Everything needed to answer queries for one (system, grid, cost, k)."""

    system: SwitchedSystem
    grid: StateGrid
    cost: TerminalCost
    k: int
    constants: list
    hypothesis: object
    substeps: tuple
    table: SuccessorTable
    values: ValueTable
    policy: PolicyTable
    build_seconds: float = 0.0

    @property
    def provenance(self) -> str:
        provs = {c.provenance for c in self.constants}
        return CERTIFIED if provs == {CERTIFIED} else "sampled-estimate"


def resolve_substeps(system, grid, constants, force=False):
    """Sub-step counts per mode from the contraction certificates at radius ``grid.eps``."""
    if len(constants) != system.n_modes:
        raise ValidationError(f"need constants for {system.n_modes} modes, got {len(constants)}")
    report = check_hypothesis(constants, grid.eps, system.tau)
    if not report.ok:
        msg = "; ".join(f"mode {u}: {r}" for u, r in report.reasons.items())
        if not force:
            raise HypothesisViolation(
                f"contraction hypothesis fails ({msg}); a finer grid lowers |lambda| G / 4, modes with lambda >= 0 cannot be certified",
                report.offending,
            )
        log.warning("contraction hypothesis fails (%s); proceeding without guarantees", msg)
    substeps = tuple(n if n is not None else 1 for n in report.substeps)
    return report, substeps


def prepare(system: SwitchedSystem, grid: StateGrid, cost: TerminalCost, k: int, constants=None,
            force: bool = False, strict: bool = False, cache_dir=None) -> Prepared:
    """Check the hypothesis, build (or load) the successor table and run the DP."""
    from . import io as eio

    t0 = time.perf_counter()
    if constants is None:
        constants = system_constants(system)
    report, substeps = resolve_substeps(system, grid, constants, force)
    table = None
    if cache_dir is not None:
        table = eio.load_cached_successors(cache_dir, system, grid, substeps, strict)
    if table is None:
        table = build_successors(system, grid, substeps, strict)
        if cache_dir is not None:
            eio.save_cached_successors(cache_dir, system, table)
    values, policy = value_iteration(table, cost, k, on_dead="mark")
    policy.grid_key = eio.cache_key(system, grid, substeps, strict)
    policy.meta = {
        "system": system.name,
        "K": grid.K,
        "k": int(k),
        "tau": system.tau,
        "cost": cost.label,
        "provenance": CERTIFIED if {c.provenance for c in constants} == {CERTIFIED} else "sampled-estimate",
        "hypothesis_ok": report.ok,
    }
    return Prepared(system, grid, cost, int(k), list(constants), report, substeps, table, values, policy,
                    time.perf_counter() - t0)


@dataclass(eq=False)
class SynthesisResult:
    """Outcome of the robust method for one initial state.

    ``trajectory`` starts at the center of the initial cell, so every state
    of that cell gets the same pattern, endpoint and value. ``true_*``
    fields simulate the same pattern from the actual initial state.
    """

    pattern: Pattern
    value: float
    trajectory: Trajectory
    eps: float
    provenance: str
    start_cell: int
    graph_value: float
    graph_endpoint: np.ndarray
    true_trajectory: Trajectory
    true_value: float
    metric: float | None
    true_metric: float | None
    hypothesis_ok: bool
    substeps: tuple
    wall_seconds: float = 0.0

    @property
    def endpoint(self):
        return self.trajectory.endpoint


def synthesize(system: SwitchedSystem, grid: StateGrid, cost: TerminalCost, k: int, y0, constants=None,
               force: bool = False, strict: bool = False, cache_dir=None, prepared: Prepared | None = None) -> SynthesisResult:
    """Robust method: optimal pattern of the initial cell, simulated with sub-sampled Euler."""
    t0 = time.perf_counter()
    # a prepared table built elsewhere still counts towards this run's cost
    reused = prepared is not None
    if prepared is None:
        prepared = prepare(system, grid, cost, k, constants, force, strict, cache_dir)
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    z0 = grid.representative(y0)
    if not np.isfinite(prepared.values.values[z0]):
        raise InvarianceViolation(f"initial cell {z0} reaches a cell without admissible modes", cells=(z0,))
    modes, cells = walk(prepared.policy, prepared.table, z0)
    pattern = Pattern(modes, system.tau)
    zc = grid.center(z0)
    traj = simulate_pattern(system, zc, pattern, prepared.substeps, bounds=system.domain)
    true_traj = simulate_pattern(system, y0, pattern, prepared.substeps, bounds=system.domain)
    return SynthesisResult(
        pattern=pattern,
        value=cost(traj.endpoint),
        trajectory=traj,
        eps=grid.eps,
        provenance=prepared.provenance,
        start_cell=z0,
        graph_value=float(prepared.values.values[z0]),
        graph_endpoint=grid.center(cells[-1]),
        true_trajectory=true_traj,
        true_value=cost(true_traj.endpoint),
        metric=cost.report_metric(traj.endpoint),
        true_metric=cost.report_metric(true_traj.endpoint),
        hypothesis_ok=prepared.hypothesis.ok,
        substeps=prepared.substeps,
        wall_seconds=(prepared.build_seconds if reused else 0.0) + (time.perf_counter() - t0),
    )


@dataclass(frozen=True)
class RobustnessReport:
    cell: int
    eps: float
    max_deviation: tuple
    violations: int
    value_gap: float | None

    @property
    def ok(self) -> bool:
        return self.violations == 0 and (self.value_gap is None or self.value_gap <= self.eps)


def verify_robustness(system: SwitchedSystem, grid: StateGrid, pattern: Pattern, y1, y2, substeps,
                      oracle_tol: float = 1e-10, cost: TerminalCost | None = None) -> RobustnessReport:
    """Compare exact solutions from ``y1``, ``y2`` with the Euler path from their common center.

    Deviations are measured at every segment boundary ``t = n tau``.
    """
    z1, z2 = grid.representative(y1), grid.representative(y2)
    if z1 != z2:
        raise ValidationError(f"states lie in different cells ({z1} vs {z2})")
    center_path = simulate_pattern(system, grid.center(z1), pattern, substeps).segment_states
    devs, violations, finals = [], 0, []
    for y in (y1, y2):
        exact = reference_solve(system, y, pattern, oracle_tol).segment_states
        d = np.linalg.norm(exact - center_path, axis=1)
        devs.append(float(d.max()))
        violations += int(np.sum(d > grid.eps))
        finals.append(exact[-1])
    gap = None if cost is None else abs(cost(finals[0]) - cost(finals[1]))
    return RobustnessReport(z1, grid.eps, tuple(devs), violations, gap)


@dataclass(frozen=True)
class ConvergenceRow:
    K: int
    eps: float
    value: float
    graph_value: float
    true_value: float
    pattern: Pattern


def convergence_study(system: SwitchedSystem, cost: TerminalCost, k: int, y0, K_list, constants=None,
                      force: bool = False) -> list:
    """Synthesize on successively finer grids and report the values."""
    rows = []
    for K in K_list:
        grid = StateGrid(system.domain, K)
        res = synthesize(system, grid, cost, k, y0, constants, force)
        rows.append(ConvergenceRow(K, grid.eps, res.value, res.graph_value, res.true_value, res.pattern))
    return rows
