import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eulersynth.dynamics import (
    AffineField,
    Box,
    CallableField,
    Pattern,
    SwitchedSystem,
    euler_segment,
    euler_step,
    reference_solve,
    simulate_pattern,
)
from eulersynth.errors import ValidationError


def decay(tau=0.1):
    return SwitchedSystem("decay", Box.cube(-2.0, 2.0, 1), (AffineField([[-1.0]], [0.0]),), tau)


def test_euler_step_decay():
    assert euler_step(decay(), [1.0], 0, 0.1)[0] == pytest.approx(0.9, abs=1e-15)


def test_euler_three_steps():
    traj = simulate_pattern(decay(), [1.0], Pattern((0, 0, 0), 0.1))
    np.testing.assert_allclose(traj.states[:, 0], [1.0, 0.9, 0.81, 0.729], atol=1e-15)
    np.testing.assert_allclose(traj.times, [0.0, 0.1, 0.2, 0.3])


def test_zero_field_is_fixed():
    sys0 = SwitchedSystem("zero", Box.cube(-1, 1, 2), (AffineField(np.zeros((2, 2)), [0.0, 0.0]),), 0.5)
    y = np.array([0.3, -0.4])
    assert np.array_equal(euler_step(sys0, y, 0, 0.5), y)


def test_callable_matches_affine():
    A = np.array([[-1.0, 2.0], [-2.0, -1.0]])
    b = np.array([0.1, 0.2])
    aff = SwitchedSystem("a", Box.cube(-1, 1, 2), (AffineField(A, b),), 0.1)
    cal = SwitchedSystem("c", Box.cube(-1, 1, 2), (CallableField(lambda y, w: y @ A.T + b, {"A": A.tolist()}),), 0.1)
    y = np.array([0.2, -0.7])
    np.testing.assert_allclose(euler_segment(aff, y, 0, 7), euler_segment(cal, y, 0, 7), rtol=1e-14, atol=1e-15)


def test_invalid_mode_and_dt():
    s = decay()
    with pytest.raises(ValidationError):
        euler_step(s, [1.0], 1, 0.1)
    with pytest.raises(ValidationError):
        euler_step(s, [1.0], 0, 0.0)
    with pytest.raises(ValidationError):
        euler_step(s, [math.nan], 0, 0.1)


def test_substeps_refine_toward_exact():
    s = decay(tau=1.0)
    errs = [abs(simulate_pattern(s, [1.0], Pattern((0,), 1.0), n).endpoint[0] - math.exp(-1)) for n in (10, 100, 1000)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-4


def test_reference_solve_exponential():
    ref = reference_solve(decay(tau=1.0), [1.0], Pattern((0,), 1.0), tol=1e-12)
    assert abs(ref.endpoint[0] - math.exp(-1)) <= 1e-10


def test_segment_states_and_csv(tmp_path):
    s = decay()
    traj = simulate_pattern(s, [1.0], Pattern((0, 0), 0.1), substeps=4)
    assert traj.states.shape == (9, 1)
    assert traj.segment_states.shape == (3, 1)
    assert traj.times[traj.segment_index[-1]] == pytest.approx(0.2)
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,y1,mode" and len(lines) == 10


def test_bounds_flag_exit():
    s = SwitchedSystem("grow", Box.cube(-1, 1, 1), (AffineField([[1.0]], [0.0]),), 0.5)
    traj = simulate_pattern(s, [0.9], Pattern((0, 0), 0.5), bounds=s.domain)
    assert not traj.contained and traj.exit_time == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=6), st.lists(st.integers(0, 2), max_size=6))
def test_pattern_concatenation(a, b):
    p, q = Pattern(a, 0.1), Pattern(b, 0.1)
    r = p + q
    assert len(r) == len(p) + len(q)
    assert list(r) == a + b


def test_pattern_tau_mismatch():
    with pytest.raises(ValidationError):
        Pattern((0,), 0.1) + Pattern((0,), 0.2)
