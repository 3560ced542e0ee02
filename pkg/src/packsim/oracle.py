"""Exact stationary analysis of a single-server request policy.

Impulse states have zero sojourn time, so the chain restricted to one
recurrent class collapses onto its proactive/quiet/jump states: every
primitive event (job transition, departure, timer tick) is followed to
the end of the impulse chain it triggers, yielding a branch distribution
over holding states plus the expected requests made along the way.  The
collapsed generator is solved densely for its stationary vector.
"""

from dataclasses import dataclass, field

import numpy as np

from .configs import ConfigSpace, CostFn
from .errors import DegeneratePolicyError, SingularGeneratorError
from .jobs import JobModel
from .policy import IMPULSE, JUMP, PROACTIVE, SingleServerPolicy


@dataclass(frozen=True)
class OracleResult:
    """Stationary behavior of one recurrent class.

    pi is full-length (zero off the class and on impulse states);
    request_rates[i] counts every type-i request per unit time, including
    those fired inside impulse chains; nominal_freq[i][k] splits the same
    counts by the configuration they were issued from.
    """

    pi: np.ndarray = field(repr=False)
    request_rates: np.ndarray = field(repr=False)
    nominal_freq: np.ndarray = field(repr=False)
    conditional_cost: float | None = None


def _closure(policy: SingleServerPolicy, rng_order):
    """Impulse-chain closure per entry configuration.

    Returns (dist, counts) where dist[x] maps holding states to the
    probability of ending there after entering x, and counts[x] is an
    (|K|, I) array of expected nominal request counts along the way.
    """
    space = policy.space
    n, p = len(space), space.num_phases
    dist = {}
    counts = {}

    def solve(x):
        if x in dist:
            return
        act = policy.actions[x]
        if act.kind != IMPULSE:
            dist[x] = {x: 1.0}
            counts[x] = np.zeros((n, p))
            return
        d = {}
        cnt = np.zeros((n, p))
        for i in range(p):
            q = act.probs[i]
            if q <= 0:
                continue
            nxt = space.shift_index(x, tuple(int(j == i) for j in range(p)))
            solve(nxt)
            cnt[x, i] += q
            cnt += q * counts[nxt]
            for z, w in dist[nxt].items():
                d[z] = d.get(z, 0.0) + q * w
        dist[x] = d
        counts[x] = cnt

    for x in rng_order:
        solve(x)
    return dist, counts


def ctmc_oracle(
    policy: SingleServerPolicy,
    model: JobModel,
    space: ConfigSpace,
    class_configs: tuple,
    cost: CostFn | None = None,
) -> OracleResult:
    """Exact stationary distribution, request rates, and conditional cost."""
    p = space.num_phases
    n = len(space)
    members = list(class_configs)
    dist, chain_counts = _closure(policy, members)

    hold = [c for c in members if policy.actions[c].kind != IMPULSE]
    pos = {c: s for s, c in enumerate(hold)}
    m = len(hold)
    if m == 0:
        raise SingularGeneratorError("class consists of impulse states only")

    # events[k] = list of (rate, pre_counts, entry) where pre_counts are the
    # requests made by the event itself before the impulse chain at entry.
    q = np.zeros((m, m))
    flows = []  # (state pos, rate, pre (n x p), entry)
    for c in hold:
        k = space.config_at(c)
        act = policy.actions[c]
        events = []
        for i in range(p):
            if k[i] >= 1:
                if model.departure_rates[i] > 0:
                    dest = space.shift_index(
                        c, tuple(-int(j == i) for j in range(p))
                    )
                    events.append((k[i] * model.departure_rates[i], None, dest))
                for j in range(p):
                    if j != i and model.internal_rates[i, j] > 0:
                        dest = space.shift_index(
                            c, tuple(int(t == j) - int(t == i) for t in range(p))
                        )
                        events.append(
                            (k[i] * model.internal_rates[i, j], None, dest)
                        )
        if act.kind == PROACTIVE:
            for i in range(p):
                if act.rates[i] > 0:
                    dest = space.shift_index(
                        c, tuple(int(j == i) for j in range(p))
                    )
                    pre = np.zeros((n, p))
                    pre[c, i] = 1.0
                    events.append((act.rates[i], pre, dest))
        elif act.kind == JUMP:
            # The tick requests the target's jobs one at a time in phase
            # order; each single-job step is a nominal transition.
            pre = np.zeros((n, p))
            x = c
            target = space.config_at(act.target)
            for i in range(p):
                for _ in range(target[i]):
                    pre[x, i] += 1.0
                    x = space.shift_index(x, tuple(int(j == i) for j in range(p)))
            events.append((1.0, pre, x))

        for rate, pre, entry in events:
            if entry not in dist:
                # The event leaves the class; cannot happen for a genuine
                # recurrent class, flag loudly.
                raise SingularGeneratorError(
                    f"event leaves the recurrent class at "
                    f"{space.config_at(entry)}"
                )
            flows.append((pos[c], rate, pre, entry))
            # Chain endpoints equal to c leave the state unchanged and
            # contribute nothing to the generator.
            for z, w in dist[entry].items():
                if z != c:
                    q[pos[c], pos[z]] += rate * w
                    q[pos[c], pos[c]] -= rate * w

    # pi Q = 0 with normalization replacing the last balance column.
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        pi_hold = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularGeneratorError(str(exc)) from exc
    if np.any(pi_hold < -1e-10):
        raise SingularGeneratorError("negative stationary mass")
    pi_hold = np.clip(pi_hold, 0.0, None)
    pi_hold /= pi_hold.sum()

    pi_full = np.zeros(n)
    for c in hold:
        pi_full[c] = pi_hold[pos[c]]

    nominal = np.zeros((n, p))
    for s, rate, pre, entry in flows:
        w = pi_hold[s] * rate
        if pre is not None:
            nominal += w * pre
        nominal += w * chain_counts[entry]
    request_rates = nominal.sum(axis=0)

    conditional = None
    if cost is not None:
        zero_idx = space.index_of((0,) * p)
        p_busy = 1.0 - pi_full[zero_idx]
        if p_busy <= 1e-12:
            raise DegeneratePolicyError(
                "policy keeps the server empty; conditional cost undefined"
            )
        conditional = float(cost.table @ pi_full) / p_busy

    return OracleResult(
        pi=pi_full,
        request_rates=request_rates,
        nominal_freq=nominal.T.copy(),
        conditional_cost=conditional,
    )
