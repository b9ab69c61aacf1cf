"""Robust optimal control of switched systems by grid dynamic programming.

The successor of every grid cell is computed with explicit Euler steps
small enough for the guaranteed error ball to contract, so a pattern
synthesised for a cell center is valid for the whole cell.
"""
from .benchmarks import BENCHMARKS, MriParameters, brute_force_optimal, build_mri, get_benchmark
from .bounds import (
    ContractionCertificate,
    DisturbanceSpec,
    ErrorConstants,
    contraction_certificate,
    delta,
    delta_disturbed,
    estimate_constants,
    subsample_count,
)
from .dynamics import AffineField, Box, CallableField, Pattern, SwitchedSystem, Trajectory
from .dynamics import euler_step, reference_solve, simulate_pattern
from .errors import EulerSynthError
from .grid import BOTTOM, StateGrid, SuccessorTable, admissible, build_successors
from .kernels import BACKEND
from .receding import compare_robust_vs_receding, run_receding
from .synthesis import (
    PolicyTable,
    SynthesisResult,
    TerminalCost,
    convergence_study,
    extract_pattern,
    synthesize,
    value_iteration,
    verify_robustness,
)

__version__ = "0.1.0"
