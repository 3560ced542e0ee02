"""Event-driven simulation of one server under a request policy.

Requests are fulfilled from an infinite job supply, so impulse chains add
jobs immediately.  The empirical outputs (time-averaged occupancy and
per-configuration request frequencies with batch-means standard errors)
are what the exact stationary oracle and the LP solution predict.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .configs import ConfigSpace
from .jobs import JobModel
from .policy import SingleServerPolicy


@dataclass(frozen=True)
class SingleRunResult:
    """Empirical estimates from one run.

    pi / pi_se: time-average occupancy per configuration and its standard
    error; freq / freq_se: nominal request frequency per (type, config);
    request_rates: total per-type requests over the window per unit time.
    """

    pi: np.ndarray = field(repr=False)
    pi_se: np.ndarray = field(repr=False)
    freq: np.ndarray = field(repr=False)
    freq_se: np.ndarray = field(repr=False)
    request_rates: np.ndarray = field(repr=False)
    events: int = 0
    window: float = 0.0


def build_single_plan(
    policy: SingleServerPolicy,
    model: JobModel,
    space: ConfigSpace,
    horizon: float,
    warmup: float,
    seed: int,
    nbatches: int = 20,
    max_events: int = 0,
):
    plus, minus, move = space.neighbor_tables()
    kind, rates, probs, target = policy.tables()
    zero = space.index_of((0,) * space.num_phases)

    jump_seq = []
    if kind[zero] == 3:  # expand the jump target in phase order
        tgt = space.config_at(target[zero])
        for i in range(space.num_phases):
            jump_seq.extend([i] * tgt[i])

    return {
        "num_phases": space.num_phases,
        "n_configs": len(space),
        "zero_idx": zero,
        "counts": np.array(space.ordering, dtype=np.int32),
        "idx_plus": plus,
        "idx_minus": minus,
        "idx_move": move,
        "mu_dep": np.asarray(model.departure_rates, dtype=float),
        "mu_move": np.asarray(model.internal_rates, dtype=float),
        "ter": np.asarray(model.exit_rates, dtype=float),
        "kind": kind,
        "pro_rate": rates,
        "pro_total": rates.sum(axis=1),
        "imp_prob": probs,
        "jump_seq": jump_seq,
        "horizon": float(horizon),
        "warmup": float(warmup),
        "nbatches": int(nbatches),
        "seed": int(seed),
        "max_events": int(max_events),
    }


def simulate_single(
    policy: SingleServerPolicy,
    model: JobModel,
    space: ConfigSpace,
    horizon: float,
    warmup: float,
    seed: int,
    nbatches: int = 20,
    backend=None,
) -> SingleRunResult:
    if not horizon >= warmup >= 0:
        raise ValueError("need horizon >= warmup >= 0")
    impl = backend or _backend
    plan = build_single_plan(
        policy, model, space, horizon, warmup, seed, nbatches
    )
    raw = impl.run_single(plan)
    window = raw["window"]
    nb = nbatches
    occ = np.asarray(raw["occupancy_batches"], dtype=float)
    req = np.asarray(raw["request_batches"], dtype=float)

    if window <= 0:
        n, p = len(space), space.num_phases
        nan = np.full(n, np.nan)
        return SingleRunResult(
            pi=nan,
            pi_se=nan.copy(),
            freq=np.full((p, n), np.nan),
            freq_se=np.full((p, n), np.nan),
            request_rates=np.full(p, np.nan),
            events=raw["events"],
            window=0.0,
        )

    batch_len = raw["batch_len"]
    pi_b = occ / batch_len                     # (nb, n)
    freq_b = req / batch_len                   # (nb, n, p)
    pi = pi_b.mean(axis=0)
    pi_se = pi_b.std(axis=0, ddof=1) / np.sqrt(nb)
    freq = freq_b.mean(axis=0).T.copy()        # (p, n)
    freq_se = (freq_b.std(axis=0, ddof=1) / np.sqrt(nb)).T.copy()
    rates = freq.sum(axis=1)  # post-warmup requests per unit time
    return SingleRunResult(
        pi=pi,
        pi_se=pi_se,
        freq=freq,
        freq_se=freq_se,
        request_rates=rates,
        events=raw["events"],
        window=window,
    )
