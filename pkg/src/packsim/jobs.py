"""Job phase model.

A job in service sits in one of a finite set of phases and follows a
continuous-time Markov chain: internal transitions move it between phases,
departure transitions absorb it.  Type-i jobs enter in phase i and arrive
as a Poisson stream whose rate is ``arrival_coeffs[i] * r`` for the scale
factor r of the experiment.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AbsorptionUnreachableError,
    ModelError,
    NegativeRateError,
    NoArrivalsError,
    SingularSystemError,
)


@dataclass(frozen=True)
class JobModel:
    """Phase-transition rates and arrival-rate coefficients.

    internal_rates[i][i'] is the rate of moving from phase i to phase i'
    (diagonal must be zero), departure_rates[i] the absorption rate out of
    phase i, and arrival_coeffs[i] the arrival-rate coefficient of type-i
    jobs.  Immutable after construction; safe to share between threads.
    """

    num_phases: int
    internal_rates: np.ndarray = field(repr=False)
    departure_rates: np.ndarray = field(repr=False)
    arrival_coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "internal_rates", np.asarray(self.internal_rates, dtype=float)
        )
        object.__setattr__(
            self, "departure_rates", np.asarray(self.departure_rates, dtype=float)
        )
        object.__setattr__(
            self, "arrival_coeffs", np.asarray(self.arrival_coeffs, dtype=float)
        )
        validate(self)

    def total_exit_rate(self, phase: int) -> float:
        """Total rate of leaving `phase` (departure plus internal moves)."""
        if not 0 <= phase < self.num_phases:
            raise ModelError(f"phase {phase} out of range")
        return float(
            self.departure_rates[phase] + self.internal_rates[phase].sum()
        )

    @property
    def exit_rates(self) -> np.ndarray:
        return self.departure_rates + self.internal_rates.sum(axis=1)


def validate(model: JobModel) -> None:
    """Check the model invariants; raise a ModelError subclass otherwise.

    Rates must be finite and nonnegative with a zero diagonal, the
    absorbing state must be reachable from every phase (finite expected
    service time), and at least one arrival coefficient must be positive.
    """
    n = model.num_phases
    if n < 1:
        raise ModelError("need at least one phase")
    if model.internal_rates.shape != (n, n):
        raise ModelError("internal_rates must be |I| x |I|")
    if model.departure_rates.shape != (n,):
        raise ModelError("departure_rates must have length |I|")
    if model.arrival_coeffs.shape != (n,):
        raise ModelError("arrival_coeffs must have length |I|")
    for arr in (model.internal_rates, model.departure_rates, model.arrival_coeffs):
        if not np.all(np.isfinite(arr)):
            raise NegativeRateError("rates must be finite")
        if np.any(arr < 0):
            raise NegativeRateError("rates must be nonnegative")
    if np.any(np.diagonal(model.internal_rates) != 0):
        raise NegativeRateError("internal_rates diagonal must be zero")
    if not np.any(model.arrival_coeffs > 0):
        raise NoArrivalsError("at least one arrival coefficient must be positive")

    # Exact graph search on positive-rate edges: from every phase some
    # phase with a positive departure rate must be reachable.
    can_depart = [False] * n
    stack = [i for i in range(n) if model.departure_rates[i] > 0]
    for i in stack:
        can_depart[i] = True
    while stack:
        j = stack.pop()
        for i in range(n):
            if not can_depart[i] and model.internal_rates[i, j] > 0:
                can_depart[i] = True
                stack.append(i)
    for i in range(n):
        if not can_depart[i]:
            raise AbsorptionUnreachableError(i)


def expected_remaining_times(model: JobModel) -> np.ndarray:
    """Expected remaining time in system for a job currently in each phase.

    Solves the first-passage system
    ``(mu_dep[i] + sum_j mu[i][j]) * t[i] = 1 + sum_j mu[i][j] * t[j]``
    by a dense linear solve.
    """
    a = np.diag(model.exit_rates) - model.internal_rates
    try:
        t = np.linalg.solve(a, np.ones(model.num_phases))
    except np.linalg.LinAlgError as exc:  # unreachable for valid models
        raise SingularSystemError(str(exc)) from exc
    return t
