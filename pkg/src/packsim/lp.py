"""The single-server request-policy LP.

Decision variables: a throughput factor phi, a stationary distribution pi
over configurations, and per-type request frequencies u_i over
configurations (u_i(k) = long-run rate of single-job requests of type i
made while in configuration k).  The LP maximizes phi subject to

* budget:        h.pi <= epsilon * (1 - pi(0))
* proportions:   sum_{k not full} u_i(k) = phi * lambda_i   for every i
* balance:       request/transition flow into each k equals flow out
* normalization: sum pi = 1,  pi >= 0,  u >= 0

Requests at a full server are structurally impossible, so u_i(k) is fixed
to zero whenever k sits at the service limit.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .configs import ConfigSpace, CostFn
from .errors import DegeneratePolicyError, LpInfeasibleError
from .jobs import JobModel


@dataclass(frozen=True)
class LpProblem:
    """Assembled LP in matrix form.

    Variable layout: [phi | pi (canonical order) | u_0 .. u_{I-1}].
    fixed_zero marks variables pinned to 0 (requests at full servers).
    """

    space: ConfigSpace
    objective: np.ndarray = field(repr=False)
    a_eq: np.ndarray = field(repr=False)
    b_eq: np.ndarray = field(repr=False)
    a_ub: np.ndarray = field(repr=False)
    b_ub: np.ndarray = field(repr=False)
    fixed_zero: np.ndarray = field(repr=False)

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]


@dataclass(frozen=True)
class LpSolution:
    """Optimal (phi, pi, u) with bookkeeping residuals."""

    phi: float
    pi: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)  # shape (num_phases, |K|)
    residuals: float = 0.0

    def to_json_dict(self, space: ConfigSpace) -> dict:
        return {
            "phi": self.phi,
            "pi": self.pi.tolist(),
            "u": self.u.tolist(),
            "residuals": self.residuals,
            "config_order": [list(k) for k in space.ordering],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "LpSolution":
        return LpSolution(
            phi=float(data["phi"]),
            pi=np.asarray(data["pi"], dtype=float),
            u=np.asarray(data["u"], dtype=float),
            residuals=float(data.get("residuals", 0.0)),
        )


def _var_pi(n_cfg: int, k: int) -> int:
    return 1 + k


def _var_u(n_cfg: int, i: int, k: int) -> int:
    return 1 + n_cfg * (1 + i) + k


def balance_row(model: JobModel, space: ConfigSpace, k_idx: int):
    """Coefficients of the flow-balance equation at configuration k.

    Inflow: requests from k - e_i, departures from k + e_i, internal
    moves from k + e_i - e_j.  Outflow: requests at k plus all job
    transitions out of k.  Terms whose configuration is infeasible drop.
    Returns (pi_coeffs, u_coeffs) as dense arrays.
    """
    n_cfg = len(space)
    p = space.num_phases
    k = space.config_at(k_idx)
    pi_c = np.zeros(n_cfg)
    u_c = np.zeros((p, n_cfg))
    mu_dep = model.departure_rates
    mu_int = model.internal_rates

    for i in range(p):
        if k[i] >= 1:
            src = space.shift_index(k_idx, tuple(-(j == i) for j in range(p)))
            u_c[i, src] += 1.0
        up = space.shift_index(k_idx, tuple((j == i) for j in range(p)))
        if up is not None:
            pi_c[up] += (k[i] + 1) * mu_dep[i]
        for j in range(p):
            if j == i or k[j] < 1:
                continue
            src = space.shift_index(
                k_idx, tuple((t == i) - (t == j) for t in range(p))
            )
            if src is not None:
                pi_c[src] += (k[i] + 1) * mu_int[i, j]

    out_rate = sum(k[i] * (mu_dep[i] + mu_int[i].sum()) for i in range(p))
    pi_c[k_idx] -= out_rate
    if not space.is_full(k_idx):  # a full server never requests
        for i in range(p):
            u_c[i, k_idx] -= 1.0
    return pi_c, u_c


def assemble_lp(
    model: JobModel, space: ConfigSpace, cost: CostFn, epsilon: float
) -> LpProblem:
    """Build the LP matrices in the canonical variable layout."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    n_cfg = len(space)
    p = space.num_phases
    n_var = 1 + n_cfg * (1 + p)
    zero_idx = space.index_of((0,) * p)

    rows = []
    rhs = []
    for k_idx in range(n_cfg):
        pi_c, u_c = balance_row(model, space, k_idx)
        row = np.zeros(n_var)
        row[1 : 1 + n_cfg] = pi_c
        for i in range(p):
            row[_var_u(n_cfg, i, 0) : _var_u(n_cfg, i, 0) + n_cfg] = u_c[i]
        rows.append(row)
        rhs.append(0.0)

    norm = np.zeros(n_var)
    norm[1 : 1 + n_cfg] = 1.0
    rows.append(norm)
    rhs.append(1.0)

    for i in range(p):
        row = np.zeros(n_var)
        for k_idx in range(n_cfg):
            if not space.is_full(k_idx):
                row[_var_u(n_cfg, i, k_idx)] = 1.0
        row[0] = -model.arrival_coeffs[i]
        rows.append(row)
        rhs.append(0.0)

    budget = np.zeros(n_var)
    budget[1 : 1 + n_cfg] = cost.table
    budget[_var_pi(n_cfg, zero_idx)] += epsilon
    a_ub = budget[None, :]
    b_ub = np.array([epsilon])

    objective = np.zeros(n_var)
    objective[0] = 1.0

    fixed_zero = np.zeros(n_var, dtype=bool)
    for k_idx in range(n_cfg):
        if space.is_full(k_idx):
            for i in range(p):
                fixed_zero[_var_u(n_cfg, i, k_idx)] = True

    return LpProblem(
        space=space,
        objective=objective,
        a_eq=np.array(rows),
        b_eq=np.array(rhs),
        a_ub=a_ub,
        b_ub=b_ub,
        fixed_zero=fixed_zero,
    )


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve to an optimal vertex; deterministic for identical input.

    Raises LpInfeasibleError when only the degenerate always-empty
    solution exists (phi* = 0), which is how an undersized budget shows
    up: the zero solution is always feasible, so literal infeasibility
    cannot occur for validated inputs.
    """
    free = ~problem.fixed_zero
    res = simplex.solve(
        problem.objective[free],
        problem.a_eq[:, free],
        problem.b_eq,
        problem.a_ub[:, free],
        problem.b_ub,
    )
    x = np.zeros(problem.num_vars)
    x[free] = res.x

    n_cfg = len(problem.space)
    p = problem.space.num_phases
    phi = float(x[0])
    pi = x[1 : 1 + n_cfg].copy()
    u = x[1 + n_cfg :].reshape(p, n_cfg).copy()

    clamp = max(0.0, float(-min(pi.min(initial=0.0), u.min(initial=0.0))))
    np.clip(pi, 0.0, None, out=pi)
    np.clip(u, 0.0, None, out=u)

    resid = lp_residual(problem, x)
    sol = LpSolution(phi=phi, pi=pi, u=u, residuals=max(resid, clamp))
    if sol.residuals > 1e-8:
        raise RuntimeError(
            f"internal solver error: residual {sol.residuals:.3e} exceeds 1e-8"
        )
    if phi <= 1e-9:
        raise LpInfeasibleError(
            "optimal throughput factor is zero: the cost budget admits only "
            "an always-empty server"
        )
    return sol


def lp_residual(problem: LpProblem, x: np.ndarray) -> float:
    eq = np.abs(problem.a_eq @ x - problem.b_eq).max(initial=0.0)
    ub = float(np.maximum(problem.a_ub @ x - problem.b_ub, 0.0).max(initial=0.0))
    return max(float(eq), ub)


def stationary_residual(
    model: JobModel, space: ConfigSpace, pi: np.ndarray, u: np.ndarray
) -> float:
    """Max absolute violation of the flow-balance equation over all k."""
    worst = 0.0
    for k_idx in range(len(space)):
        pi_c, u_c = balance_row(model, space, k_idx)
        val = float(pi_c @ pi + sum(u_c[i] @ u[i] for i in range(space.num_phases)))
        worst = max(worst, abs(val))
    return worst


def required_servers(phi_star: float, r: float) -> float:
    """Server count needed at scale r: r / phi*.

    Callers take the ceiling when sizing an actual pool.
    """
    if phi_star <= 0:
        raise DegeneratePolicyError("phi* must be positive")
    return r / phi_star


def solution_to_json(sol: LpSolution, space: ConfigSpace) -> str:
    return json.dumps(sol.to_json_dict(space), indent=2)
