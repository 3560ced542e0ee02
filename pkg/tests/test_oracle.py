import numpy as np
import pytest

from packsim import configs, jobs, lp, oracle, policy
from packsim.errors import DegeneratePolicyError
from packsim.policy import QUIET, PolicyAction

from test_policy import single_phase_optimum, two_class_pair


def test_single_phase_collapsed_chain():
    model, space, sol = single_phase_optimum()
    pol = policy.build_policy(sol, space)
    cost = configs.make_cost_fn(space, np.zeros(2), 0.0)
    res = oracle.ctmc_oracle(pol, model, space, (0, 1), cost)
    assert res.pi == pytest.approx([0.0, 1.0], abs=1e-12)
    assert res.request_rates == pytest.approx([1.0], abs=1e-12)
    assert res.conditional_cost == pytest.approx(0.0)


def test_all_quiet_concentrates_on_empty():
    model = jobs.JobModel(1, [[0.0]], [1.0], [1.0])
    space = configs.enumerate_space(1, 2)
    actions = tuple(PolicyAction(QUIET) for _ in range(len(space)))
    pol = policy.SingleServerPolicy(space, actions)
    cls = (space.index_of((0,)),)
    res = oracle.ctmc_oracle(pol, model, space, cls)
    assert res.pi[space.index_of((0,))] == pytest.approx(1.0)
    assert res.request_rates == pytest.approx([0.0])


def test_all_quiet_conditional_cost_degenerate():
    model = jobs.JobModel(1, [[0.0]], [1.0], [1.0])
    space = configs.enumerate_space(1, 2)
    actions = tuple(PolicyAction(QUIET) for _ in range(len(space)))
    pol = policy.SingleServerPolicy(space, actions)
    cost = configs.make_cost_fn(space, [0.0, 1.0, 2.0], 2.0)
    with pytest.raises(DegeneratePolicyError):
        oracle.ctmc_oracle(pol, model, space, (space.index_of((0,)),), cost)


def two_phase_instance():
    model = jobs.JobModel(2, [[0, 1], [1, 0]], [1, 2], [1, 1])
    space = configs.enumerate_space(2, 3)
    cost = configs.overcommit_cost(space, [[1.0], [2.0]], [3.0])
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, 0.1))
    return model, space, cost, sol


def test_policy_recovers_lp_solution():
    # The LP pair and the independently-built collapsed chain must agree.
    model, space, cost, sol = two_phase_instance()
    pol = policy.build_policy(sol, space)
    classes = policy.recurrent_classes(pol, model, space)
    covered = [c for cls in classes for c in cls if sol.pi[c] > 0]
    assert covered  # the optimum has recurrent mass
    dec = policy.decompose(pol, sol, model, space)
    res = oracle.ctmc_oracle(pol, model, space, dec.classes[0], cost)
    tv = 0.5 * np.abs(res.pi - sol.pi).sum()
    assert tv <= 1e-8
    lam = np.asarray(model.arrival_coeffs)
    assert np.abs(res.request_rates - sol.phi * lam).max() <= 1e-8
    assert np.abs(res.nominal_freq - sol.u).max() <= 1e-8
    assert res.conditional_cost <= 0.1 + 1e-9


def test_oracle_equivalence_random_feasible_points():
    # Any feasible vertex, not just the optimum, must be recovered.
    model, space, cost, _ = two_phase_instance()
    rng = np.random.default_rng(11)
    for _ in range(6):
        eps = float(rng.uniform(0.05, 0.8))
        sol = lp.solve_lp(lp.assemble_lp(model, space, cost, eps))
        pol = policy.build_policy(sol, space)
        dec = policy.decompose(pol, sol, model, space)
        mix_pi = np.zeros(len(space))
        mix_phi = np.zeros(2)
        for j, cls in enumerate(dec.classes):
            res = oracle.ctmc_oracle(pol, model, space, cls, cost)
            mix_pi += dec.weights[j] * res.pi
            mix_phi += dec.weights[j] * res.request_rates
        assert 0.5 * np.abs(mix_pi - sol.pi).sum() <= 1e-8
        assert np.abs(mix_phi - sol.phi * np.asarray(model.arrival_coeffs)).max() <= 1e-8


def test_two_class_oracles_match_decomposition():
    model, space, sol = two_class_pair()
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    for j, cls in enumerate(dec.classes):
        res = oracle.ctmc_oracle(pol, model, space, cls)
        assert np.abs(res.pi - dec.class_pi[j]).max() <= 1e-10
        assert res.request_rates == pytest.approx(
            dec.class_request_rates[j], abs=1e-10
        )


def test_jump_policy_oracle():
    # The restricted class policy (with the jump re-entry rule) has the
    # same in-class stationary law; verify through the oracle.
    model, space, sol = two_class_pair()
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    restricted = dec.policies[0]
    res = oracle.ctmc_oracle(restricted, model, space, dec.classes[0])
    assert np.abs(res.pi - dec.class_pi[0]).max() <= 1e-10
