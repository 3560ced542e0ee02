import numpy as np
import pytest
from scipy.optimize import linprog

from packsim import simplex
from packsim.errors import LpInfeasibleError, LpUnboundedError


def test_simple_max():
    # max x + y, x + 2y <= 4, 3x + y <= 6  ->  (8/5, 6/5)
    res = simplex.solve(
        [1.0, 1.0],
        np.zeros((0, 2)),
        np.zeros(0),
        [[1.0, 2.0], [3.0, 1.0]],
        [4.0, 6.0],
    )
    assert res.objective == pytest.approx(2.8, abs=1e-9)
    assert res.x == pytest.approx([1.6, 1.2], abs=1e-9)


def test_equality_only():
    # max x with x + y = 1.
    res = simplex.solve([1.0, 0.0], [[1.0, 1.0]], [1.0])
    assert res.objective == pytest.approx(1.0, abs=1e-12)


def test_redundant_rows():
    # Duplicate equality rows must not break phase 2.
    res = simplex.solve(
        [0.0, 1.0],
        [[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]],
        [1.0, 1.0, 2.0],
    )
    assert res.objective == pytest.approx(1.0, abs=1e-9)


def test_infeasible():
    with pytest.raises(LpInfeasibleError):
        simplex.solve([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 3.0])


def test_unbounded():
    with pytest.raises(LpUnboundedError):
        simplex.solve([1.0], np.zeros((0, 1)), np.zeros(0))


def test_negative_rhs_handled():
    # x - y = -2 with x,y >= 0: max -x-y  ->  x=0, y=2.
    res = simplex.solve([-1.0, -1.0], [[1.0, -1.0]], [-2.0])
    assert res.x == pytest.approx([0.0, 2.0], abs=1e-9)


def test_degenerate_vertex_terminates():
    # Classic degeneracy: several constraints through one vertex.
    res = simplex.solve(
        [1.0, 1.0],
        np.zeros((0, 2)),
        np.zeros(0),
        [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        [1.0, 1.0, 1.0],
    )
    assert res.objective == pytest.approx(1.0, abs=1e-9)


def test_deterministic():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 1, size=(4, 6))
    b = rng.uniform(1, 2, size=4)
    c = rng.uniform(0, 1, size=6)
    r1 = simplex.solve(c, np.zeros((0, 6)), np.zeros(0), a, b)
    r2 = simplex.solve(c, np.zeros((0, 6)), np.zeros(0), a, b)
    assert np.array_equal(r1.x, r2.x)
    assert r1.basis == r2.basis


def test_against_scipy_random_instances():
    rng = np.random.default_rng(42)
    for trial in range(40):
        n = int(rng.integers(2, 8))
        m_eq = int(rng.integers(0, 3))
        m_ub = int(rng.integers(1, 5))
        a_eq = rng.uniform(-1, 1, size=(m_eq, n))
        a_ub = rng.uniform(0, 1, size=(m_ub, n))
        b_ub = rng.uniform(0.5, 2.0, size=m_ub)
        c = rng.uniform(0, 1, size=n)
        # Build a guaranteed-feasible equality rhs from a random point.
        x0 = rng.uniform(0, 1, size=n)
        b_eq = a_eq @ x0 if m_eq else np.zeros(0)
        # Make sure x0 also satisfies the <= rows.
        b_ub = np.maximum(b_ub, a_ub @ x0 + 0.1)
        ref = linprog(
            -c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq if m_eq else None,
            b_eq=b_eq if m_eq else None, bounds=(0, None), method="highs",
        )
        assert ref.status == 0
        res = simplex.solve(c, a_eq, b_eq, a_ub, b_ub)
        assert res.objective == pytest.approx(-ref.fun, abs=1e-7)
