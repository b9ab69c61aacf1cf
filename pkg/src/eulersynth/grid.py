"""Uniform state grid, cell representatives and the Euler successor table."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Box, SwitchedSystem, advance_batch
from .errors import InvarianceViolation, OutOfDomainError, ValidationError

log = logging.getLogger(__name__)

#: marks an inadmissible (state, mode) pair in a successor table
BOTTOM = -1


@dataclass(frozen=True, eq=False)
class StateGrid:
    """``K`` cells per axis over ``box``; grid points are the cell centers.

    Cells are half-open ``[a, b)`` except the last one on each axis, which
    is closed, so every point of the box belongs to exactly one cell.
    """

    box: Box
    k_per_axis: int

    def __post_init__(self):
        if isinstance(self.k_per_axis, bool) or int(self.k_per_axis) != self.k_per_axis or self.k_per_axis < 1:
            raise ValidationError(f"K must be a positive integer, got {self.k_per_axis!r}")
        object.__setattr__(self, "k_per_axis", int(self.k_per_axis))

    @property
    def K(self) -> int:
        return self.k_per_axis

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def size(self) -> int:
        return self.K**self.dim

    @property
    def width(self) -> np.ndarray:
        return (self.box.hi - self.box.lo) / self.K

    @property
    def eps(self) -> float:
        """Half-diagonal of a cell: the largest distance to its center."""
        return float(np.linalg.norm(self.width / 2))

    def axis_centers(self) -> np.ndarray:
        """``(dim, K)`` array of per-axis center coordinates."""
        k = np.arange(self.K) + 0.5
        return self.box.lo[:, None] + self.width[:, None] * k[None, :]

    def unravel(self, index) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(index), (self.K,) * self.dim), axis=-1)

    def ravel(self, coords) -> np.ndarray:
        coords = np.asarray(coords)
        return np.ravel_multi_index(tuple(np.moveaxis(coords, -1, 0)), (self.K,) * self.dim)

    def center(self, index) -> np.ndarray:
        coords = self.unravel(index)
        return self.box.lo + self.width * (coords + 0.5)

    def centers(self) -> np.ndarray:
        """All ``K**dim`` centers in flat-index order."""
        return self.center(np.arange(self.size))

    def _coords(self, Y) -> np.ndarray:
        c = np.floor((Y - self.box.lo) / self.width).astype(np.int64)
        return np.clip(c, 0, self.K - 1)

    def representative(self, y) -> int:
        """Flat index of the cell containing ``y``."""
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != self.dim:
            raise ValidationError(f"state has dimension {y.size}, grid has {self.dim}")
        if not self.box.contains(y):
            raise OutOfDomainError(f"state {y.tolist()} lies outside the domain box")
        return int(self.ravel(self._coords(y)))

    def representatives(self, Y) -> np.ndarray:
        """Vectorised :meth:`representative` for an ``(n, dim)`` array."""
        Y = np.asarray(Y, dtype=float)
        inside = self.box.contains(Y)
        if not np.all(inside):
            bad = Y[np.argmin(inside)]
            raise OutOfDomainError(f"state {bad.tolist()} lies outside the domain box")
        return self.ravel(self._coords(Y))

    def describe(self) -> dict:
        return {"lo": self.box.lo.tolist(), "hi": self.box.hi.tolist(), "K": self.K}


@dataclass(eq=False)
class SuccessorTable:
    """``entries[z, u]`` is the cell reached from center ``z`` under mode ``u`` or :data:`BOTTOM`."""

    grid: StateGrid
    entries: np.ndarray
    substeps: tuple
    tau: float
    strict: bool = False
    violations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_modes(self) -> int:
        return self.entries.shape[1]

    def next(self, z: int, u: int) -> int:
        return int(self.entries[z, u])


def build_successors(system: SwitchedSystem, grid: StateGrid, substeps, strict: bool = False) -> SuccessorTable:
    """Tabulate the Euler successor of every cell center under every mode.

    ``substeps`` gives the Euler sub-step count per mode (or one count for
    all). A mode is admissible at a center when the end of the ``tau`` step
    lies in the box; with ``strict`` every sub-step point must also lie in
    it. Rows without any admissible mode are returned in ``violations``.
    """
    if grid.box != system.domain:
        raise ValidationError("grid box and system domain differ")
    m = system.n_modes
    if isinstance(substeps, (int, np.integer)):
        substeps = (int(substeps),) * m
    substeps = tuple(int(n) for n in substeps)
    if len(substeps) != m or min(substeps) < 1:
        raise ValidationError(f"need one substep count >= 1 per mode, got {substeps}")
    Z = grid.centers()
    entries = np.empty((grid.size, m), dtype=np.int32)
    for u in range(m):
        Y, stayed = advance_batch(system, Z, u, substeps[u], strict)
        ok = system.domain.contains(Y) & stayed & np.all(np.isfinite(Y), axis=1)
        col = np.full(grid.size, BOTTOM, dtype=np.int32)
        if np.any(ok):
            col[ok] = grid.ravel(grid._coords(Y[ok]))
        entries[:, u] = col
    violations = np.flatnonzero(np.all(entries == BOTTOM, axis=1))
    if violations.size:
        log.warning("%d grid cells have no admissible mode (controlled Euler-invariance fails)", violations.size)
    return SuccessorTable(grid, entries, substeps, system.tau, strict, violations)


def admissible(table: SuccessorTable, z: int) -> tuple:
    """Modes whose successor from cell ``z`` stays in the box, in increasing order."""
    row = table.entries[z]
    modes = tuple(int(u) for u in np.flatnonzero(row != BOTTOM))
    if not modes:
        raise InvarianceViolation(f"cell {z} has no admissible mode", cells=(z,))
    return modes


def min_cells_per_axis(dim: int, eps: float, side: float = 1.0) -> int:
    """Smallest ``K`` with half-diagonal at most ``eps`` on a cube of the given side."""
    return math.ceil(side * math.sqrt(dim) / (2 * eps))
