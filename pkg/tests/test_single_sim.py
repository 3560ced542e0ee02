import numpy as np
import pytest

from packsim import configs, jobs, lp, oracle, policy, single_sim

from test_policy import single_phase_optimum, two_class_pair


def test_zero_horizon_empty_tallies():
    model, space, sol = single_phase_optimum()
    pol = policy.build_policy(sol, space)
    res = single_sim.simulate_single(pol, model, space, 0.0, 0.0, seed=1)
    assert res.events == 0
    assert res.window == 0.0
    assert np.all(np.isnan(res.pi))


def test_single_phase_occupancy_converges():
    model, space, sol = single_phase_optimum()
    pol = policy.build_policy(sol, space)
    res = single_sim.simulate_single(
        pol, model, space, horizon=20000.0, warmup=1000.0, seed=3
    )
    # Oracle: the server is busy all the time.
    busy = space.index_of((1,))
    assert abs(res.pi[busy] - 1.0) <= max(3 * res.pi_se[busy], 1e-9)
    assert res.request_rates[0] == pytest.approx(1.0, rel=0.05)


def test_empirical_matches_oracle_and_lp():
    model = jobs.JobModel(2, [[0, 1], [1, 0]], [1, 2], [1, 1])
    space = configs.enumerate_space(2, 3)
    cost = configs.overcommit_cost(space, [[1.0], [2.0]], [3.0])
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, 0.1))
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    ora = oracle.ctmc_oracle(pol, model, space, dec.classes[0], cost)
    res = single_sim.simulate_single(
        pol, model, space, horizon=30000.0, warmup=3000.0, seed=21
    )
    for k in range(len(space)):
        tol = max(3 * res.pi_se[k], 1e-12)
        assert abs(res.pi[k] - ora.pi[k]) <= tol, space.config_at(k)
    for i in range(2):
        for k in range(len(space)):
            tol = max(3 * res.freq_se[i, k], 1e-12)
            assert abs(res.freq[i, k] - sol.u[i, k]) <= tol


def test_jump_policy_reenters_class():
    model, space, sol = two_class_pair()
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    res = single_sim.simulate_single(
        dec.policies[0], model, space, horizon=8000.0, warmup=800.0, seed=9
    )
    k_hold = space.index_of((2, 0))
    tol = max(3 * res.pi_se[k_hold], 0.01)
    assert abs(res.pi[k_hold] - 1.0) <= tol
    # The class never visits the other branch.
    assert res.pi[space.index_of((0, 2))] == 0.0


def test_determinism_and_seed_sensitivity():
    model, space, sol = single_phase_optimum()
    pol = policy.build_policy(sol, space)
    a = single_sim.simulate_single(pol, model, space, 500.0, 50.0, seed=4)
    b = single_sim.simulate_single(pol, model, space, 500.0, 50.0, seed=4)
    c = single_sim.simulate_single(pol, model, space, 500.0, 50.0, seed=5)
    assert np.array_equal(a.pi, b.pi)
    assert np.array_equal(a.freq, b.freq)
    assert a.events == b.events
    assert a.events != c.events  # different stream, different trajectory


def test_all_quiet_stays_empty():
    model = jobs.JobModel(1, [[0.0]], [1.0], [1.0])
    space = configs.enumerate_space(1, 2)
    actions = tuple(policy.PolicyAction(policy.QUIET) for _ in range(len(space)))
    pol = policy.SingleServerPolicy(space, actions)
    res = single_sim.simulate_single(pol, model, space, 100.0, 10.0, seed=2)
    assert res.pi[space.index_of((0,))] == pytest.approx(1.0)
    assert res.events == 0
