"""Request policies built from an LP solution.

The LP's (pi, u) pair turns into a per-configuration action table:

* proactive (pi(k) > 0): one exponential timer per type with rate
  u_i(k) / pi(k); a tick requests one type-i job.
* impulse (pi(k) = 0, sum u(k) > 0): on entering k, immediately request a
  type-i job with probability u_i(k) / sum u(k).  Chains of impulse states
  execute back to back.
* quiet (pi(k) = 0, sum u(k) = 0): never request.

A reducible policy decomposes into one restriction per recurrent class of
its jump chain; the per-class policy re-enters its class from the empty
configuration through a rate-1 "jump" action that requests the jobs of a
fixed in-class configuration.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .configs import ConfigSpace
from .errors import ImpulseCycleError, MassOffRecurrentSupportError
from .jobs import JobModel
from .lp import LpSolution

QUIET, PROACTIVE, IMPULSE, JUMP = 0, 1, 2, 3
KIND_NAMES = {QUIET: "quiet", PROACTIVE: "proactive", IMPULSE: "impulse", JUMP: "jump"}

ZERO_THRESHOLD = 1e-9


@dataclass(frozen=True)
class PolicyAction:
    kind: int
    rates: tuple = ()   # proactive timer rates, one per type
    probs: tuple = ()   # impulse branch probabilities, one per type
    target: int = -1    # jump: config index requested on the timer tick

    @property
    def kind_name(self) -> str:
        return KIND_NAMES[self.kind]


@dataclass(frozen=True)
class SingleServerPolicy:
    """One action per configuration, in canonical order."""

    space: ConfigSpace
    actions: tuple
    zero_threshold: float = ZERO_THRESHOLD

    def action(self, k_idx: int) -> PolicyAction:
        return self.actions[k_idx]

    def tables(self):
        """Flat arrays for the simulation kernels."""
        n, p = len(self.space), self.space.num_phases
        kind = np.zeros(n, dtype=np.int8)
        rates = np.zeros((n, p))
        probs = np.zeros((n, p))
        target = np.full(n, -1, dtype=np.int32)
        for c, act in enumerate(self.actions):
            kind[c] = act.kind
            if act.kind == PROACTIVE:
                rates[c] = act.rates
            elif act.kind == IMPULSE:
                probs[c] = act.probs
            elif act.kind == JUMP:
                target[c] = act.target
        return kind, rates, probs, target


def build_policy(
    sol: LpSolution, space: ConfigSpace, zero_threshold: float = ZERO_THRESHOLD
) -> SingleServerPolicy:
    """Three-case action construction from a feasible LP solution."""
    n, p = len(space), space.num_phases
    actions = []
    for c in range(n):
        pi_k = float(sol.pi[c])
        u_k = np.clip(sol.u[:, c], 0.0, None)
        total_u = float(u_k.sum())
        if pi_k > zero_threshold:
            actions.append(
                PolicyAction(PROACTIVE, rates=tuple(u_k / pi_k))
            )
        elif total_u > zero_threshold:
            if space.is_full(c):
                raise ImpulseCycleError(
                    f"requests attributed to the full configuration "
                    f"{space.config_at(c)}"
                )
            actions.append(PolicyAction(IMPULSE, probs=tuple(u_k / total_u)))
        else:
            actions.append(PolicyAction(QUIET))
    policy = SingleServerPolicy(space, tuple(actions), zero_threshold)
    _check_impulse_chains(policy)
    return policy


def _check_impulse_chains(policy: SingleServerPolicy) -> None:
    """Reject immediate-request cycles.

    Every impulse step adds a job, so genuine LP solutions cannot cycle;
    the walk is a cheap guard against hand-built action tables.
    """
    space = policy.space
    p = space.num_phases
    for start, act in enumerate(policy.actions):
        if act.kind != IMPULSE:
            continue
        stack = [(start, (start,))]
        while stack:
            c, path = stack.pop()
            for i in range(p):
                if policy.actions[c].probs[i] <= 0:
                    continue
                nxt = space.shift_index(c, tuple(int(j == i) for j in range(p)))
                if nxt is None:
                    raise ImpulseCycleError(
                        f"impulse at {space.config_at(c)} requests past the "
                        f"service limit"
                    )
                if policy.actions[nxt].kind != IMPULSE:
                    continue
                if nxt in path:
                    raise ImpulseCycleError(
                        f"impulse chain revisits {space.config_at(nxt)}"
                    )
                stack.append((nxt, path + (nxt,)))


def jump_edges(policy: SingleServerPolicy, model: JobModel):
    """Directed positive-probability jumps of the embedded chain.

    Includes departures and internal transitions, proactive requests with
    positive rate, impulse branches, and jump targets.  Impulse states
    appear as explicit nodes, so chain reachability composes transitively.
    """
    space = policy.space
    p = space.num_phases
    edges = []
    for c in range(len(space)):
        act = policy.actions[c]
        k = space.config_at(c)
        if act.kind == IMPULSE:
            for i in range(p):
                if act.probs[i] > 0:
                    edges.append((c, space.shift_index(c, _unit(p, i))))
            continue
        for i in range(p):
            if k[i] >= 1:
                if model.departure_rates[i] > 0:
                    edges.append((c, space.shift_index(c, _unit(p, i, -1))))
                for j in range(p):
                    if j != i and model.internal_rates[i, j] > 0:
                        delta = tuple(
                            int(t == j) - int(t == i) for t in range(p)
                        )
                        edges.append((c, space.shift_index(c, delta)))
        if act.kind == PROACTIVE:
            for i in range(p):
                if act.rates[i] > 0:
                    edges.append((c, space.shift_index(c, _unit(p, i))))
        elif act.kind == JUMP:
            edges.append((c, act.target))
    return edges


def _unit(p: int, i: int, sign: int = 1):
    return tuple(sign * int(j == i) for j in range(p))


def recurrent_classes(
    policy: SingleServerPolicy, model: JobModel, space: ConfigSpace
) -> list:
    """Bottom strongly-connected components of the jump graph.

    Returned as sorted tuples of config indices, ordered by their smallest
    member for determinism.
    """
    n = len(space)
    edges = jump_edges(policy, model)
    rows = [a for a, _ in edges]
    cols = [b for _, b in edges]
    graph = csr_matrix(
        (np.ones(len(edges)), (rows, cols)), shape=(n, n)
    )
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    has_exit = np.zeros(n_comp, dtype=bool)
    for a, b in edges:
        if labels[a] != labels[b]:
            has_exit[labels[a]] = True
    classes = [
        tuple(sorted(np.flatnonzero(labels == comp).tolist()))
        for comp in range(n_comp)
        if not has_exit[comp]
    ]
    classes.sort(key=lambda cls: cls[0])
    return classes


@dataclass(frozen=True)
class RecurrentDecomposition:
    """Per-class restriction of a (possibly reducible) policy.

    weights[j] is the stationary mass of class j; class_pi[j] the
    renormalized stationary vector (full length, zero off class);
    class_request_rates[j] the per-type request rates of the restricted
    policy; policies[j] the restricted policy with the jump re-entry rule.
    Classes carrying no stationary mass are omitted.
    """

    classes: tuple
    weights: np.ndarray = field(repr=False)
    class_pi: np.ndarray = field(repr=False)          # (J, |K|)
    class_request_rates: np.ndarray = field(repr=False)  # (J, I)
    policies: tuple = ()

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def mixture_pi(self) -> np.ndarray:
        return self.weights @ self.class_pi

    def mixture_request_rates(self) -> np.ndarray:
        return self.weights @ self.class_request_rates


def class_policy(
    policy: SingleServerPolicy, class_configs: tuple
) -> SingleServerPolicy:
    """Restrict to one class; off-class states drain quietly.

    At the empty configuration (when it is off-class) a rate-1 jump
    requests the lexicographically smallest in-class configuration.
    """
    space = policy.space
    members = set(class_configs)
    zero_idx = space.index_of((0,) * space.num_phases)
    target = min(class_configs, key=lambda c: space.config_at(c))
    actions = []
    for c in range(len(space)):
        if c in members:
            actions.append(policy.actions[c])
        elif c == zero_idx:
            actions.append(PolicyAction(JUMP, target=target))
        else:
            actions.append(PolicyAction(QUIET))
    return SingleServerPolicy(space, tuple(actions), policy.zero_threshold)


def decompose(
    policy: SingleServerPolicy,
    sol: LpSolution,
    model: JobModel,
    space: ConfigSpace,
    mass_tol: float = 1e-8,
) -> RecurrentDecomposition:
    """Split (pi, u) across the recurrent classes of the jump chain."""
    classes = recurrent_classes(policy, model, space)
    covered = np.zeros(len(space), dtype=bool)
    for cls in classes:
        covered[list(cls)] = True
    off_mass = float(sol.pi[~covered].sum())
    if off_mass > mass_tol:
        raise MassOffRecurrentSupportError(
            f"stationary mass {off_mass:.3e} outside every recurrent class"
        )
    off_u = float(np.clip(sol.u[:, ~covered], 0.0, None).sum())
    if off_u > mass_tol:
        raise MassOffRecurrentSupportError(
            f"request mass {off_u:.3e} outside every recurrent class"
        )

    kept, weights, pis, rates, pols = [], [], [], [], []
    for cls in classes:
        idx = list(cls)
        w = float(sol.pi[idx].sum())
        if w <= 1e-12:
            continue  # transient-only class (e.g. a quiet empty state)
        kept.append(cls)
        weights.append(w)
        pi_j = np.zeros(len(space))
        pi_j[idx] = sol.pi[idx] / w
        pis.append(pi_j)
        rates.append(sol.u[:, idx].sum(axis=1) / w)
        pols.append(class_policy(policy, cls))
    return RecurrentDecomposition(
        classes=tuple(kept),
        weights=np.array(weights),
        class_pi=np.array(pis),
        class_request_rates=np.array(rates),
        policies=tuple(pols),
    )
