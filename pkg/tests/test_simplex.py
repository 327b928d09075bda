"""Two-phase simplex against textbook cases and a scipy cross-check."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from loadsizer.milp.simplex import solve_lp


def test_basic_maximization():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), obj 36
    res = solve_lp(
        c=[-3, -5],
        a_ub=[[1, 0], [0, 2], [3, 2]],
        b_ub=[4, 12, 18],
    )
    assert res.ok
    assert res.x == pytest.approx([2, 6], abs=1e-9)
    assert res.fun == pytest.approx(-36, abs=1e-9)


def test_equality_constraints_need_phase1():
    # min x + 2y + 3z s.t. x + y + z = 1, x - y = 0.2
    res = solve_lp(
        c=[1, 2, 3],
        a_eq=[[1, 1, 1], [1, -1, 0]],
        b_eq=[1, 0.2],
    )
    assert res.ok
    assert res.x == pytest.approx([0.6, 0.4, 0.0], abs=1e-9)


def test_infeasible_detected():
    res = solve_lp(c=[1], a_ub=[[1], [-1]], b_ub=[1, -3])  # x <= 1 and x >= 3
    assert res.status == "infeasible"


def test_unbounded_detected():
    res = solve_lp(c=[-1], a_ub=[[-1]], b_ub=[0])  # max x, x >= 0 only
    assert res.status == "unbounded"


def test_negative_rhs_rows():
    # x >= 2 encoded as -x <= -2, minimize x
    res = solve_lp(c=[1], a_ub=[[-1]], b_ub=[-2])
    assert res.ok
    assert res.x == pytest.approx([2], abs=1e-9)


def test_degenerate_cycling_guard():
    # classic Beale cycling example (converges with anti-cycling)
    c = [-0.75, 150, -0.02, 6]
    a_ub = [
        [0.25, -60, -0.04, 9],
        [0.5, -90, -0.02, 3],
        [0, 0, 1, 0],
    ]
    b_ub = [0, 0, 1]
    res = solve_lp(c, a_ub, b_ub)
    assert res.ok
    assert res.fun == pytest.approx(-0.05, abs=1e-9)


def test_redundant_equalities():
    res = solve_lp(
        c=[1, 1],
        a_eq=[[1, 1], [2, 2]],
        b_eq=[1, 2],  # same plane twice
    )
    assert res.ok
    assert res.fun == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_random_lps_match_scipy(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    m = int(rng.integers(1, 10))
    c = rng.normal(size=n)
    a_ub = rng.normal(size=(m, n))
    b_ub = rng.uniform(0.1, 2.0, size=m)
    # add a box to keep things bounded
    a_ub = np.vstack([a_ub, np.eye(n)])
    b_ub = np.concatenate([b_ub, np.full(n, 3.0)])
    mine = solve_lp(c, a_ub, b_ub)
    ref = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    assert mine.ok and ref.status == 0
    assert mine.fun == pytest.approx(ref.fun, abs=1e-7)


@pytest.mark.parametrize("seed", range(8, 14))
def test_random_eq_lps_match_scipy(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    m_eq = int(rng.integers(1, 3))
    c = rng.normal(size=n)
    a_eq = rng.normal(size=(m_eq, n))
    x_feas = rng.uniform(0.1, 1.0, size=n)
    b_eq = a_eq @ x_feas  # guarantees feasibility
    a_ub = np.eye(n)
    b_ub = np.full(n, 2.0)
    mine = solve_lp(c, a_ub, b_ub, a_eq, b_eq)
    ref = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert mine.ok and ref.status == 0
    assert mine.fun == pytest.approx(ref.fun, abs=1e-7)
