import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from csober.errors import SolverStall
from csober.simplex import InfeasibleProblem, UnboundedProblem, solve_highs, solve_simplex


def test_textbook_lp():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
    res = solve_simplex([-3, -5], A_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18])
    np.testing.assert_allclose(res.x, [2, 6], atol=1e-10)
    assert res.fun == pytest.approx(-36)


def test_equality_and_negative_rhs():
    # min x + 2y s.t. x + y == 3, -x <= -1 (x >= 1) -> (3, 0)
    res = solve_simplex([1, 2], A_ub=[[-1, 0]], b_ub=[-1], A_eq=[[1, 1]], b_eq=[3])
    np.testing.assert_allclose(res.x, [3, 0], atol=1e-10)


def test_infeasible_detected():
    with pytest.raises(InfeasibleProblem):
        solve_simplex([1, 1], A_ub=[[1, 1]], b_ub=[1], A_eq=[[1, 1]], b_eq=[2])


def test_unbounded_detected():
    with pytest.raises(UnboundedProblem):
        solve_simplex([-1, 0], A_ub=[[0, 1]], b_ub=[1])


def test_iteration_limit_stalls():
    with pytest.raises(SolverStall):
        solve_simplex([-3, -5], A_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18], max_iter=1)


def test_beale_cycling_example_terminates():
    # a classic instance on which Dantzig pricing with naive ties cycles
    c = np.array([-0.75, 150, -0.02, 6])
    A = np.array([[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]])
    b = np.array([0, 0, 1])
    res = solve_simplex(c, A_ub=A, b_ub=b)
    assert res.fun == pytest.approx(-0.05, abs=1e-10)


def test_redundant_equalities():
    res = solve_simplex([1, 1, 1], A_eq=[[1, 1, 1], [2, 2, 2]], b_eq=[1, 2])
    assert res.x.sum() == pytest.approx(1.0)


@settings(max_examples=40)
@given(st.integers(0, 100_000))
def test_matches_highs_on_random_bounded_lps(seed):
    r = np.random.default_rng(seed)
    n, m = int(r.integers(2, 12)), int(r.integers(1, 8))
    A = r.normal(size=(m, n))
    x0 = r.random(n)
    b = A @ x0 + r.random(m)                    # x0 is strictly feasible
    A_eq = np.ones((1, n))
    c = r.normal(size=n)
    ours = solve_simplex(c, A, b, A_eq, [x0.sum()])
    ref = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[x0.sum()], method="highs")
    assert ref.status == 0
    assert ours.fun == pytest.approx(ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
    assert np.all(A @ ours.x <= b + 1e-9)
    # vertex: at most (number of rows) nonzeros
    assert np.count_nonzero(ours.x > 1e-12) <= m + 1


def test_highs_adapter_agrees():
    c, A, b = [-3, -5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18]
    assert solve_highs(c, A, b).fun == pytest.approx(solve_simplex(c, A, b).fun)
