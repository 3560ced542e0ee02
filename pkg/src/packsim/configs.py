"""Server configurations, their enumeration, and contention cost tables.

A configuration is the per-phase job-count vector of one server; it is
feasible when the total is at most the service limit kmax.  The canonical
ordering (ascending total jobs, ties broken by the first phase with more
jobs coming first) fixes the variable layout of the LP and the column
order of all serialized output.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CostTableError, NegativeWeightError, SizeOverflowError

Config = tuple  # per-phase job counts, length num_phases

DEFAULT_SIZE_CAP = 10**6


@dataclass(frozen=True)
class ConfigSpace:
    """Canonical enumeration of feasible configurations."""

    num_phases: int
    kmax: int
    ordering: tuple = field(repr=False)
    index_map: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.ordering)

    def config_at(self, n: int) -> Config:
        return self.ordering[n]

    def index_of(self, config: Config) -> int:
        return self.index_map[tuple(config)]

    def total(self, n: int) -> int:
        return sum(self.ordering[n])

    def is_full(self, n: int) -> bool:
        return sum(self.ordering[n]) == self.kmax

    def shift(self, config: Config, delta) -> Config | None:
        """config + delta, or None when the result is infeasible."""
        out = tuple(c + d for c, d in zip(config, delta))
        if any(c < 0 for c in out) or sum(out) > self.kmax:
            return None
        return out

    def shift_index(self, n: int, delta) -> int | None:
        out = self.shift(self.ordering[n], delta)
        return None if out is None else self.index_map[out]

    def neighbor_tables(self):
        """Index tables for k+e_i, k-e_i and k-e_i+e_j (-1 = infeasible).

        These feed the simulation kernels, which work on flat indices.
        """
        n, p = len(self.ordering), self.num_phases
        plus = np.full((n, p), -1, dtype=np.int32)
        minus = np.full((n, p), -1, dtype=np.int32)
        move = np.full((n, p, p), -1, dtype=np.int32)
        for c, k in enumerate(self.ordering):
            for i in range(p):
                up = self.shift(k, tuple(1 if j == i else 0 for j in range(p)))
                if up is not None:
                    plus[c, i] = self.index_map[up]
                if k[i] >= 1:
                    down = tuple(v - 1 if j == i else v for j, v in enumerate(k))
                    minus[c, i] = self.index_map[down]
                    for i2 in range(p):
                        if i2 == i:
                            continue
                        dst = tuple(
                            v - (j == i) + (j == i2) for j, v in enumerate(k)
                        )
                        move[c, i, i2] = self.index_map[dst]
        return plus, minus, move


def enumerate_space(
    num_phases: int, kmax: int, size_cap: int = DEFAULT_SIZE_CAP
) -> ConfigSpace:
    """Enumerate all configurations with total jobs <= kmax.

    The count is C(kmax + num_phases, num_phases) (stars and bars); raises
    SizeOverflowError before materializing anything larger than size_cap.
    """
    if num_phases < 1 or kmax < 1:
        raise ValueError("num_phases and kmax must be >= 1")
    count = math.comb(kmax + num_phases, num_phases)
    if count > size_cap:
        raise SizeOverflowError(f"{count} configurations exceeds cap {size_cap}")

    configs = []

    def rec(prefix, remaining):
        if len(prefix) == num_phases - 1:
            for last in range(remaining + 1):
                configs.append(prefix + (last,))
            return
        for v in range(remaining + 1):
            rec(prefix + (v,), remaining - v)

    rec((), kmax)
    # Ascending total; within a total, larger early phases first so that
    # e.g. (1,0) precedes (0,1).
    configs.sort(key=lambda k: (sum(k), tuple(-v for v in k)))
    assert len(configs) == count
    index_map = {k: n for n, k in enumerate(configs)}
    return ConfigSpace(num_phases, kmax, tuple(configs), index_map)


@dataclass(frozen=True)
class CostFn:
    """Materialized contention-cost table over a ConfigSpace.

    Always a full table (the space is small), so the simulator gets O(1)
    lookups and the Lipschitz bound can be verified exhaustively.
    """

    table: np.ndarray = field(repr=False)
    lipschitz_bound: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "table", np.asarray(self.table, dtype=float))

    def __call__(self, index: int) -> float:
        return float(self.table[index])


def make_cost_fn(space: ConfigSpace, table, lipschitz_bound: float) -> CostFn:
    """Validate h(0)=0 and |h(k)-h(k')| <= bound * L1(k,k') over all pairs."""
    values = np.asarray(table, dtype=float)
    if values.shape != (len(space),):
        raise CostTableError("cost table length must match the space")
    if not np.all(np.isfinite(values)):
        raise CostTableError("cost values must be finite")
    zero = space.index_of((0,) * space.num_phases)
    if values[zero] != 0.0:
        raise CostTableError("cost of the empty configuration must be 0")
    counts = np.array(space.ordering, dtype=float)
    for a in range(len(space)):
        dist = np.abs(counts - counts[a]).sum(axis=1)
        diff = np.abs(values - values[a])
        bad = diff > lipschitz_bound * dist + 1e-12
        if np.any(bad):
            b = int(np.argmax(bad))
            raise CostTableError(
                f"pair {space.ordering[a]}, {space.ordering[b]} violates the "
                f"Lipschitz bound {lipschitz_bound}"
            )
    return CostFn(values, float(lipschitz_bound))


def tightest_lipschitz(space: ConfigSpace, table) -> float:
    """Smallest L1-Lipschitz constant consistent with a cost table."""
    values = np.asarray(table, dtype=float)
    counts = np.array(space.ordering, dtype=float)
    best = 0.0
    for a in range(len(space)):
        dist = np.abs(counts - counts[a]).sum(axis=1)
        diff = np.abs(values - values[a])
        mask = dist > 0
        if np.any(mask):
            best = max(best, float(np.max(diff[mask] / dist[mask])))
    return best


def overcommit_cost(
    space: ConfigSpace, weights, capacity, gamma_hint: float | None = None
) -> CostFn:
    """Cost of exceeding per-resource capacity.

    weights[i][res] is the phase-i requirement of each resource (a flat
    list is treated as a single resource); h(k) sums, over resources, the
    positive part of total requirement minus capacity.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    cap = np.atleast_1d(np.asarray(capacity, dtype=float))
    if w.shape != (space.num_phases, cap.shape[0]):
        raise NegativeWeightError(
            "weights must be (num_phases x num_resources) matching capacity"
        )
    if np.any(w < 0):
        raise NegativeWeightError("resource weights must be nonnegative")
    counts = np.array(space.ordering, dtype=float)
    usage = counts @ w  # |K| x resources
    table = np.maximum(usage - cap, 0.0).sum(axis=1)
    # Per-phase total weight bounds the cost change of adding one job; a
    # caller-supplied bound is verified against the table like any other.
    gamma = float(w.sum(axis=1).max()) if gamma_hint is None else float(gamma_hint)
    return make_cost_fn(space, table, gamma)
