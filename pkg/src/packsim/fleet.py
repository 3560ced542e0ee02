"""Fleet simulation: token-based dispatch over server pools.

Each recurrent class of the single-server policy gets its own pool of
``ceil(weight * r / phi)`` normal servers running the class-restricted
policy.  Requests become typed tokens held by a central dispatcher;
arrivals are routed to pools by probabilistic thinning and consume a
uniformly random token of their type, or overflow to the pool's backup
servers when no token exists.  Outstanding tokens per type are capped at
``ceil(sqrt(pool size))``; pushing past the cap converts a random token
into a virtual job (same dynamics, consumes no resources, invisible to
the cost but visible to the policy).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .configs import ConfigSpace, CostFn
from .jobs import JobModel
from .lp import required_servers
from .policy import RecurrentDecomposition
from .rng import derive_seed


@dataclass(frozen=True)
class FleetPlan:
    """Resolved world parameters plus the raw kernel plan."""

    r: float
    nbar: float
    pool_sizes: tuple
    token_caps: tuple
    routing: np.ndarray = field(repr=False)  # (J, I) thinning probabilities
    kernel_plan: dict = field(repr=False)


def token_cap(pool_size: int) -> int:
    return int(math.ceil(math.sqrt(pool_size)))


def init_world(
    model: JobModel,
    space: ConfigSpace,
    cost: CostFn,
    decomposition: RecurrentDecomposition,
    phi_star: float,
    r: float,
    seed: int,
    horizon: float = 0.0,
    warmup: float = 0.0,
    nbatches: int = 20,
    max_events: int = 0,
    check: bool = False,
    trace: bool = False,
) -> FleetPlan:
    """Size pools, thin arrivals, and assemble the kernel plan."""
    if r <= 0:
        raise ValueError("scale r must be positive")
    nbar = required_servers(phi_star, r)
    weights = decomposition.weights
    rates = decomposition.class_request_rates  # (J, I)
    n_pools = decomposition.num_classes

    # Route type-i arrivals to pool j proportionally to the pool's share
    # of the total request rate for that type.
    lam = np.asarray(model.arrival_coeffs, dtype=float)
    denom = weights @ rates  # (I,)
    routing = np.zeros((n_pools, space.num_phases))
    for i in range(space.num_phases):
        if lam[i] <= 0:
            continue
        if denom[i] <= 0:
            raise ValueError(
                f"type {i} arrives but no recurrent class requests it"
            )
        routing[:, i] = weights * rates[:, i] / denom[i]

    plus, minus, move = space.neighbor_tables()
    zero = space.index_of((0,) * space.num_phases)
    pools = []
    sizes = []
    caps = []
    for j in range(n_pools):
        size = int(math.ceil(weights[j] * nbar))
        if size <= 0:
            continue
        kind, p_rates, probs, target = decomposition.policies[j].tables()
        jump_seq = []
        if kind[zero] == 3:
            tgt = space.config_at(target[zero])
            for i in range(space.num_phases):
                jump_seq.extend([i] * tgt[i])
        sizes.append(size)
        caps.append(token_cap(size))
        pools.append(
            {
                "L": size,
                "token_cap": token_cap(size),
                "arrival_rates": lam * r * routing[j],
                "kind": kind,
                "pro_rate": p_rates,
                "pro_total": p_rates.sum(axis=1),
                "imp_prob": probs,
                "jump_seq": jump_seq,
            }
        )

    kernel_plan = {
        "num_phases": space.num_phases,
        "n_configs": len(space),
        "zero_idx": zero,
        "kmax": space.kmax,
        "idx_plus": plus,
        "idx_minus": minus,
        "idx_move": move,
        "totals": np.array([space.total(c) for c in range(len(space))],
                           dtype=np.int32),
        "h": cost.table,
        "mu_dep": np.asarray(model.departure_rates, dtype=float),
        "mu_move": np.asarray(model.internal_rates, dtype=float),
        "ter": np.asarray(model.exit_rates, dtype=float),
        "pools": pools,
        "horizon": float(horizon),
        "warmup": float(warmup),
        "nbatches": int(nbatches),
        "seed": int(seed),
        "max_events": int(max_events),
        "check": bool(check),
        "trace": bool(trace),
    }
    return FleetPlan(
        r=r,
        nbar=nbar,
        pool_sizes=tuple(sizes),
        token_caps=tuple(caps),
        routing=routing,
        kernel_plan=kernel_plan,
    )


def run(plan: FleetPlan, backend=None) -> dict:
    """Advance the world to its horizon; returns raw kernel output."""
    impl = backend or _backend
    return impl.run_fleet(plan.kernel_plan)


def step_records(plan: FleetPlan, max_events: int, backend=None):
    """First max_events events as decoded records, for inspection.

    Each record is (time, kind, pool, server, job_type); kinds are the
    names in _backend.TRACE_NAMES.  Sub-actions of one event (token
    generation, enforced virtual deliveries) appear as separate records
    at the same timestamp.
    """
    impl = backend or _backend
    capped = dict(plan.kernel_plan)
    capped["horizon"] = float("inf")
    capped["warmup"] = 0.0
    capped["max_events"] = int(max_events)
    capped["trace"] = True
    out = impl.run_fleet(capped)
    return [
        (t, _backend.TRACE_NAMES[code], p, s, ty)
        for t, code, p, s, ty in out["trace"]
    ]


def estimate_event_rate(
    plan: FleetPlan, pilot_events: int = 20000, backend=None
) -> float:
    """Events per unit time, measured on a short throwaway run."""
    impl = backend or _backend
    pilot = dict(plan.kernel_plan)
    pilot["horizon"] = float("inf")
    pilot["warmup"] = 0.0
    pilot["max_events"] = int(pilot_events)
    pilot["check"] = False
    pilot["trace"] = False
    pilot["seed"] = derive_seed(plan.kernel_plan["seed"], 9, 0, 0)
    out = impl.run_fleet(pilot)
    if out["end_time"] <= 0 or out["events"] < pilot_events:
        raise RuntimeError("pilot run ended prematurely; rates may be zero")
    return out["events"] / out["end_time"]


def build_baseline_plan(
    model: JobModel,
    space: ConfigSpace,
    cost: CostFn,
    r: float,
    strategy: str,
    seed: int,
    horizon: float,
    warmup: float,
    nbatches: int = 20,
    max_events: int = 0,
) -> dict:
    if strategy not in ("first-fit", "new-server-always"):
        raise ValueError(f"unknown baseline strategy {strategy!r}")
    plus, minus, move = space.neighbor_tables()
    zero = space.index_of((0,) * space.num_phases)
    return {
        "num_phases": space.num_phases,
        "n_configs": len(space),
        "zero_idx": zero,
        "kmax": space.kmax,
        "idx_plus": plus,
        "idx_minus": minus,
        "idx_move": move,
        "h": cost.table,
        "mu_dep": np.asarray(model.departure_rates, dtype=float),
        "mu_move": np.asarray(model.internal_rates, dtype=float),
        "ter": np.asarray(model.exit_rates, dtype=float),
        "arrival_rates": np.asarray(model.arrival_coeffs, dtype=float) * r,
        "strategy": strategy,
        "horizon": float(horizon),
        "warmup": float(warmup),
        "nbatches": int(nbatches),
        "seed": int(seed),
        "max_events": int(max_events),
    }


def run_baseline(plan: dict, backend=None) -> dict:
    impl = backend or _backend
    return impl.run_baseline(plan)
