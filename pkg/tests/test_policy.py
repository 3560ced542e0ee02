import numpy as np
import pytest

from packsim import configs, jobs, lp, policy
from packsim.errors import ImpulseCycleError, MassOffRecurrentSupportError
from packsim.policy import IMPULSE, JUMP, PROACTIVE, QUIET


def single_phase_optimum():
    model = jobs.JobModel(1, [[0.0]], [1.0], [1.0])
    space = configs.enumerate_space(1, 1)
    cost = configs.make_cost_fn(space, np.zeros(2), 0.0)
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, 0.0))
    return model, space, sol


def two_class_pair():
    """Hand-built reducible feasible pair.

    Two phases without internal moves, kmax=2.  Mass 0.3 cycles between
    (1,0) and (2,0); mass 0.7 between (0,1) and (0,2).  Balance at (2,0)
    forces u_0(1,0) = 2*mu*pi(2,0) = 0.6, and symmetrically
    u_1(0,1) = 1.4.
    """
    model = jobs.JobModel(
        2, [[0.0, 0.0], [0.0, 0.0]], [1.0, 1.0], [0.6, 1.4]
    )
    space = configs.enumerate_space(2, 2)
    pi = np.zeros(len(space))
    pi[space.index_of((2, 0))] = 0.3
    pi[space.index_of((0, 2))] = 0.7
    u = np.zeros((2, len(space)))
    u[0, space.index_of((1, 0))] = 0.6
    u[1, space.index_of((0, 1))] = 1.4
    sol = lp.LpSolution(phi=1.0, pi=pi, u=u, residuals=0.0)
    assert lp.stationary_residual(model, space, pi, u) <= 1e-12
    return model, space, sol


def test_three_case_construction():
    model, space, sol = single_phase_optimum()
    pol = policy.build_policy(sol, space)
    assert pol.action(space.index_of((0,))).kind == IMPULSE
    assert pol.action(space.index_of((0,))).probs == (1.0,)
    # Full configuration carries stationary mass but no requests.
    full = pol.action(space.index_of((1,)))
    assert full.kind == PROACTIVE
    assert full.rates == (0.0,)


def test_impulse_probs_normalized():
    space = configs.enumerate_space(2, 2)
    pi = np.zeros(len(space))
    pi[space.index_of((1, 1))] = 1.0
    u = np.zeros((2, len(space)))
    u[0, space.index_of((0, 0))] = 2.0
    u[1, space.index_of((0, 0))] = 1.0
    sol = lp.LpSolution(phi=1.0, pi=pi, u=u)
    pol = policy.build_policy(sol, space)
    act = pol.action(space.index_of((0, 0)))
    assert act.kind == IMPULSE
    assert act.probs == pytest.approx((2 / 3, 1 / 3))


def test_proactive_rates():
    space = configs.enumerate_space(1, 2)
    pi = np.array([0.0, 0.25, 0.75])
    u = np.array([[0.0, 0.5, 0.0]])
    sol = lp.LpSolution(phi=0.5, pi=pi, u=u)
    pol = policy.build_policy(sol, space)
    assert pol.action(1).kind == PROACTIVE
    assert pol.action(1).rates == pytest.approx((2.0,))
    assert pol.action(0).kind == QUIET


def test_request_past_limit_rejected():
    space = configs.enumerate_space(1, 1)
    pi = np.array([1.0, 0.0])
    u = np.array([[0.0, 1.0]])  # request at the full configuration
    sol = lp.LpSolution(phi=1.0, pi=pi, u=u)
    with pytest.raises(ImpulseCycleError):
        policy.build_policy(sol, space)


def test_recurrent_class_single_phase():
    model, space, sol = single_phase_optimum()
    pol = policy.build_policy(sol, space)
    classes = policy.recurrent_classes(pol, model, space)
    assert classes == [(0, 1)]


def test_all_quiet_class_is_empty_config():
    model = jobs.JobModel(1, [[0.0]], [1.0], [1.0])
    space = configs.enumerate_space(1, 2)
    actions = tuple(policy.PolicyAction(QUIET) for _ in range(len(space)))
    pol = policy.SingleServerPolicy(space, actions)
    classes = policy.recurrent_classes(pol, model, space)
    assert classes == [(space.index_of((0,)),)]


def test_two_class_detection():
    model, space, sol = two_class_pair()
    pol = policy.build_policy(sol, space)
    classes = policy.recurrent_classes(pol, model, space)
    as_configs = [
        tuple(space.config_at(c) for c in cls) for cls in classes
    ]
    assert ((1, 0), (2, 0)) in as_configs
    assert ((0, 1), (0, 2)) in as_configs
    # The quiet empty configuration is its own (massless) class.
    assert ((0, 0),) in as_configs


def test_decompose_two_classes():
    model, space, sol = two_class_pair()
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    assert dec.num_classes == 2
    assert dec.weights == pytest.approx([0.3, 0.7])
    for j in range(2):
        assert dec.class_pi[j].sum() == pytest.approx(1.0)
    # Reconstruction identities.
    assert dec.mixture_pi() == pytest.approx(sol.pi, abs=1e-8)
    assert dec.mixture_request_rates() == pytest.approx(
        sol.u.sum(axis=1), abs=1e-8
    )
    assert dec.class_request_rates[0] == pytest.approx([2.0, 0.0])
    assert dec.class_request_rates[1] == pytest.approx([0.0, 2.0])


def test_decompose_irreducible_is_degenerate():
    model, space, sol = single_phase_optimum()
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    assert dec.num_classes == 1
    assert dec.weights == pytest.approx([1.0])
    assert np.array_equal(dec.class_pi[0], sol.pi)


def test_decompose_rejects_off_support_mass():
    model, space, sol = two_class_pair()
    pol = policy.build_policy(sol, space)
    bad_pi = sol.pi.copy()
    bad_pi[space.index_of((1, 1))] = 0.01
    bad = lp.LpSolution(phi=sol.phi, pi=bad_pi, u=sol.u)
    with pytest.raises(MassOffRecurrentSupportError):
        policy.decompose(pol, bad, model, space)


def test_class_policy_jump_rule():
    model, space, sol = two_class_pair()
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    first = dec.policies[0]
    zero = space.index_of((0, 0))
    act = first.action(zero)
    assert act.kind == JUMP
    # Lexicographically smallest member of {(1,0),(2,0)}.
    assert space.config_at(act.target) == (1, 0)
    # Off-class nonempty states stay quiet.
    assert first.action(space.index_of((0, 1))).kind == QUIET
    # In-class states keep their original action.
    assert first.action(space.index_of((1, 0))).kind == IMPULSE


def test_two_phase_single_class_covers_reachable_states():
    model = jobs.JobModel(2, [[0, 1], [1, 0]], [1, 2], [1, 1])
    space = configs.enumerate_space(2, 3)
    cost = configs.overcommit_cost(space, [[1.0], [2.0]], [3.0])
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, 0.1))
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    assert dec.num_classes == 1
    assert dec.weights == pytest.approx([1.0])
