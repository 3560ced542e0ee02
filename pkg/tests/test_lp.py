import json

import numpy as np
import pytest
from scipy.optimize import linprog

from packsim import configs, jobs, lp
from packsim.errors import DegeneratePolicyError, LpInfeasibleError


def single_phase_setup(mu=1.0, lam=1.0, kmax=1):
    model = jobs.JobModel(1, [[0.0]], [mu], [lam])
    space = configs.enumerate_space(1, kmax)
    cost = configs.make_cost_fn(space, np.zeros(len(space)), 0.0)
    return model, space, cost


def two_phase_setup(epsilon=0.1, kmax=3):
    model = jobs.JobModel(
        2,
        [[0.0, 1.0], [1.0, 0.0]],
        [1.0, 2.0],
        [1.0, 1.0],
    )
    space = configs.enumerate_space(2, kmax)
    cost = configs.overcommit_cost(space, [[1.0], [2.0]], [3.0])
    return model, space, cost, epsilon


def scipy_solve(problem):
    """Independent LP oracle for phi* (never used by the implementation)."""
    bounds = [(0.0, 0.0) if f else (0.0, None) for f in problem.fixed_zero]
    res = linprog(
        -problem.objective,
        A_eq=problem.a_eq,
        b_eq=problem.b_eq,
        A_ub=problem.a_ub,
        b_ub=problem.b_ub,
        bounds=bounds,
        method="highs",
    )
    assert res.status == 0, res.message
    return -res.fun


def test_assembled_rows_single_phase():
    # Written out by hand: balance at (0) is mu*pi(1) - u(0) = 0 and
    # balance at (1) is u(0) - mu*pi(1) = 0.
    model, space, cost = single_phase_setup()
    prob = lp.assemble_lp(model, space, cost, 0.0)
    # Layout: [phi, pi0, pi1, u0_at0, u0_at1].
    i0 = space.index_of((0,))
    i1 = space.index_of((1,))
    row0 = prob.a_eq[i0]
    assert row0 == pytest.approx([0.0, 0.0, 1.0, -1.0, 0.0])
    row1 = prob.a_eq[i1]
    assert row1 == pytest.approx([0.0, 0.0, -1.0, 1.0, 0.0])
    # Normalization then one throughput row.
    assert prob.a_eq[2] == pytest.approx([0.0, 1.0, 1.0, 0.0, 0.0])
    assert prob.a_eq[3] == pytest.approx([-1.0, 0.0, 0.0, 1.0, 0.0])
    assert prob.b_eq == pytest.approx([0.0, 0.0, 1.0, 0.0])
    # u is pinned to zero at the full configuration.
    assert list(prob.fixed_zero) == [False] * 4 + [True]


def test_full_config_row_has_no_request_outflow():
    model, space, cost, eps = two_phase_setup()
    prob = lp.assemble_lp(model, space, cost, eps)
    k_full = space.index_of((3, 0))
    n = len(space)
    for i in range(2):
        col = 1 + n * (1 + i) + k_full
        assert prob.fixed_zero[col]


def test_row_counts_two_phase_kmax2():
    model = jobs.JobModel(2, [[0, 1], [1, 0]], [1, 2], [1, 1])
    space = configs.enumerate_space(2, 2)
    cost = configs.make_cost_fn(space, np.zeros(len(space)), 0.0)
    prob = lp.assemble_lp(model, space, cost, 0.5)
    assert len(space) == 6
    assert prob.a_eq.shape[0] == 6 + 1 + 2
    assert prob.a_ub.shape[0] == 1


def test_single_phase_optimum():
    model, space, cost = single_phase_setup(mu=1.0, lam=1.0)
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, 0.0))
    assert sol.phi == pytest.approx(1.0, abs=1e-9)
    assert sol.pi == pytest.approx([0.0, 1.0], abs=1e-9)
    assert sol.u[0] == pytest.approx([1.0, 0.0], abs=1e-9)


def test_single_phase_lambda_scaling():
    model, space, cost = single_phase_setup(mu=1.0, lam=2.0)
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, 0.0))
    assert sol.phi == pytest.approx(0.5, abs=1e-9)


def test_budget_too_small_is_infeasible():
    # Positive cost everywhere except empty, epsilon below anything
    # achievable: only the always-empty solution remains.
    model = jobs.JobModel(1, [[0.0]], [1.0], [1.0])
    space = configs.enumerate_space(1, 2)
    cost = configs.make_cost_fn(space, [0.0, 1.0, 2.0], 1.0)
    with pytest.raises(LpInfeasibleError):
        lp.solve_lp(lp.assemble_lp(model, space, cost, 0.01))


def test_two_phase_solution_feasibility():
    model, space, cost, eps = two_phase_setup()
    prob = lp.assemble_lp(model, space, cost, eps)
    sol = lp.solve_lp(prob)
    assert lp.stationary_residual(model, space, sol.pi, sol.u) <= 1e-8
    assert sol.pi.sum() == pytest.approx(1.0, abs=1e-9)
    # Budget row.
    zero = space.index_of((0, 0))
    lhs = float(cost.table @ sol.pi)
    assert lhs <= eps * (1.0 - sol.pi[zero]) + 1e-8
    # Throughput proportionality.
    for i in range(2):
        tot = sum(
            sol.u[i, k] for k in range(len(space)) if not space.is_full(k)
        )
        assert tot == pytest.approx(sol.phi * model.arrival_coeffs[i], abs=1e-8)
    # Requests never happen at a full server.
    for k in range(len(space)):
        if space.is_full(k):
            assert sol.u[:, k] == pytest.approx(0.0, abs=1e-12)


def test_two_phase_matches_scipy():
    model, space, cost, eps = two_phase_setup()
    prob = lp.assemble_lp(model, space, cost, eps)
    sol = lp.solve_lp(prob)
    assert sol.phi == pytest.approx(scipy_solve(prob), abs=1e-8)


def test_phi_monotone_in_epsilon():
    model, space, cost, _ = two_phase_setup()
    values = []
    for eps in (0.02, 0.1, 0.5):
        prob = lp.assemble_lp(model, space, cost, eps)
        values.append(lp.solve_lp(prob).phi)
    assert values[0] <= values[1] + 1e-9
    assert values[1] <= values[2] + 1e-9


def test_phi_invariant_under_phase_relabel():
    model, space, cost, eps = two_phase_setup()
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, eps))
    # Swap the two phases everywhere.
    model2 = jobs.JobModel(
        2, [[0.0, 1.0], [1.0, 0.0]], [2.0, 1.0], [1.0, 1.0]
    )
    cost2 = configs.overcommit_cost(space, [[2.0], [1.0]], [3.0])
    sol2 = lp.solve_lp(lp.assemble_lp(model2, space, cost2, eps))
    assert sol.phi == pytest.approx(sol2.phi, abs=1e-9)


def test_stationary_residual_detects_imbalance():
    model, space, cost = single_phase_setup()
    pi = np.full(len(space), 0.5)
    u = np.zeros((1, len(space)))
    assert lp.stationary_residual(model, space, pi, u) > 0.1


def test_stationary_residual_hand_solution():
    model, space, cost = single_phase_setup()
    pi = np.array([0.25, 0.75])
    u = np.array([[0.75, 0.0]])  # u(0) = mu * pi(1)
    assert lp.stationary_residual(model, space, pi, u) <= 1e-12


def test_required_servers():
    assert lp.required_servers(1.0, 10.0) == pytest.approx(10.0)
    assert lp.required_servers(0.5, 10.0) == pytest.approx(20.0)
    assert lp.required_servers(1.0, 10.4) == pytest.approx(10.4)
    with pytest.raises(DegeneratePolicyError):
        lp.required_servers(0.0, 1.0)


def test_solution_json_roundtrip():
    model, space, cost, eps = two_phase_setup()
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, eps))
    data = json.loads(lp.solution_to_json(sol, space))
    back = lp.LpSolution.from_json_dict(data)
    assert back.phi == sol.phi
    assert np.array_equal(back.pi, sol.pi)
    assert np.array_equal(back.u, sol.u)
    assert data["config_order"][0] == [0, 0]


def test_epsilon_inactive_when_cost_zero():
    model, space, cost = single_phase_setup()
    a = lp.solve_lp(lp.assemble_lp(model, space, cost, 0.0))
    b = lp.solve_lp(lp.assemble_lp(model, space, cost, 100.0))
    assert a.phi == pytest.approx(b.phi, abs=1e-9)
