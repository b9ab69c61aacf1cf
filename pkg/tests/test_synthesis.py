import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eulersynth.benchmarks import OracleInstance, brute_force_optimal
from eulersynth.dynamics import Box, Pattern
from eulersynth.errors import HypothesisViolation, InvarianceViolation, ValidationError
from eulersynth.grid import BOTTOM, StateGrid, SuccessorTable
from eulersynth.synthesis import (
    NO_MODE,
    TerminalCost,
    convergence_study,
    distance_cost,
    extract_pattern,
    prepare,
    synthesize,
    value_iteration,
    verify_robustness,
    walk,
)


def line_table(entries, K=None):
    entries = np.asarray(entries, dtype=np.int32)
    K = K or entries.shape[0]
    return SuccessorTable(StateGrid(Box.cube(0.0, 1.0, 1), K), entries, (1,) * entries.shape[1], 0.1)


def coord_cost():
    return TerminalCost(lambda Y: Y[:, 0], "x")


def test_k_zero_is_terminal_cost():
    t = line_table([[1, 0], [2, 1], [2, 2]])
    v, pol = value_iteration(t, coord_cost(), 0)
    np.testing.assert_array_equal(v.values, t.grid.centers()[:, 0])
    assert pol.policy.shape == (0, 3)


def test_ties_go_to_lowest_mode():
    t = line_table([[0, 0, 1], [0, 0, 1], [1, 2, 2]])
    _, pol = value_iteration(t, coord_cost(), 1)
    assert pol.policy[0].tolist() == [0, 0, 0]


def test_dead_cells():
    t = line_table([[1, BOTTOM], [BOTTOM, BOTTOM], [2, 0]])
    t.violations = np.array([1])
    with pytest.raises(InvarianceViolation):
        value_iteration(t, coord_cost(), 2)
    v, pol = value_iteration(t, coord_cost(), 2, on_dead="mark")
    # cell 0 can only step into the dead cell 1 and then is stuck
    assert np.isinf(v.values[0]) and np.isinf(v.values[1])
    assert pol.first_mode(2, 0) == NO_MODE
    assert pol.first_mode(1, 2) == 1 and pol.first_mode(2, 2) == 0
    with pytest.raises(InvarianceViolation):
        walk(pol, t, 0)


def test_value_iteration_arguments():
    t = line_table([[0]])
    with pytest.raises(ValidationError):
        value_iteration(t, coord_cost(), -1)
    with pytest.raises(ValidationError):
        value_iteration(t, coord_cost(), 1, on_dead="skip")


@st.composite
def instances(draw):
    K = draw(st.integers(2, 7))
    dim = draw(st.integers(1, 2))
    m = draw(st.integers(1, 3))
    k = draw(st.integers(1, 8))
    while m**k > 10**4:
        k -= 1
    N = K**dim
    rows = [[draw(st.integers(-1, N - 1)) for _ in range(m)] for _ in range(N)]
    for r in rows:
        if all(e == BOTTOM for e in r):
            r[0] = draw(st.integers(0, N - 1))
    grid = StateGrid(Box.cube(-1.0, 1.0, dim), K)
    table = SuccessorTable(grid, np.asarray(rows, dtype=np.int32), (1,) * m, 0.1)
    # a coarse cost produces plenty of ties
    target = np.array(draw(st.lists(st.floats(-1, 1), min_size=dim, max_size=dim)))
    cost = TerminalCost(lambda Y, t=target: np.round(np.linalg.norm(Y - t, axis=-1), 1), "rounded")
    z0 = draw(st.integers(0, N - 1))
    return OracleInstance(table, cost, k, z0)


@settings(max_examples=150, deadline=None)
@given(instances())
def test_dp_matches_brute_force(inst):
    v, pol = value_iteration(inst.table, inst.cost, inst.k)
    pat, val = brute_force_optimal(inst)
    assert extract_pattern(pol, inst.table, inst.z0) == pat
    assert v.values[inst.z0] == val


def test_synthesize_toy1d(toy1d):
    g = toy1d.grid()
    res = synthesize(toy1d.system, g, toy1d.cost, toy1d.k, toy1d.y0)
    assert len(res.pattern) == toy1d.k
    assert res.value == toy1d.cost(res.trajectory.endpoint)
    assert res.trajectory.states[0] == pytest.approx(g.center(res.start_cell))
    assert res.true_trajectory.states[0] == pytest.approx(toy1d.y0)
    assert res.graph_value == toy1d.cost(res.graph_endpoint)
    assert res.hypothesis_ok and res.provenance == "certified-by-user"


def test_same_cell_same_answer(toy2d):
    g = toy2d.grid()
    p = prepare(toy2d.system, g, toy2d.cost, toy2d.k)
    z = g.representative(toy2d.y0)
    c = g.center(z)
    a = synthesize(toy2d.system, g, toy2d.cost, toy2d.k, c + 0.4 * g.width / 2, prepared=p)
    b = synthesize(toy2d.system, g, toy2d.cost, toy2d.k, c - 0.9 * g.width / 2, prepared=p)
    assert a.pattern == b.pattern
    assert np.array_equal(a.endpoint, b.endpoint) and a.value == b.value
    assert not np.array_equal(a.true_trajectory.endpoint, b.true_trajectory.endpoint)


def test_robustness_report(toy2d):
    g = toy2d.grid()
    p = prepare(toy2d.system, g, toy2d.cost, toy2d.k)
    z = g.representative(toy2d.y0)
    c = g.center(z)
    pat = synthesize(toy2d.system, g, toy2d.cost, toy2d.k, toy2d.y0, prepared=p).pattern
    rep = verify_robustness(toy2d.system, g, pat, c + 0.49 * g.width, c - 0.49 * g.width, p.substeps, cost=toy2d.cost)
    assert rep.ok and max(rep.max_deviation) <= g.eps
    with pytest.raises(ValidationError):
        verify_robustness(toy2d.system, g, pat, c, c + g.width, p.substeps)


def test_hypothesis_violation_needs_force(toy1d):
    from eulersynth.bounds import ErrorConstants

    consts = [ErrorConstants(1.0, 1.0, 0.5, mode=u) for u in range(3)]
    g = toy1d.grid()
    with pytest.raises(HypothesisViolation) as exc:
        prepare(toy1d.system, g, toy1d.cost, 2, consts)
    assert exc.value.modes == (0, 1, 2)
    p = prepare(toy1d.system, g, toy1d.cost, 2, consts, force=True)
    assert not p.hypothesis.ok and p.substeps == (1, 1, 1)


def test_convergence_rows(toy1d):
    rows = convergence_study(toy1d.system, toy1d.cost, toy1d.k, toy1d.y0, [11, 51])
    assert [r.K for r in rows] == [11, 51]
    assert rows[1].eps < rows[0].eps


def test_distance_cost_scalar_and_batch():
    c = distance_cost([0.0, 0.0])
    assert c([3.0, 4.0]) == 5.0
    np.testing.assert_array_equal(c(np.array([[3.0, 4.0], [0.0, 1.0]])), [5.0, 1.0])


def test_pattern_from_walk_has_tau(toy1d):
    p = prepare(toy1d.system, toy1d.grid(), toy1d.cost, 3)
    pat = extract_pattern(p.policy, p.table, 0)
    assert isinstance(pat, Pattern) and pat.tau == toy1d.system.tau and len(pat) == 3
