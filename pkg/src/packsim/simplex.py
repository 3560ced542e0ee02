"""Dense two-phase simplex with Bland's anti-cycling rule.

Solves  max c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.

The problems here are tiny (tens to a few hundred variables), often with
redundant equality rows, and must solve deterministically, so a dense
revised method with the lowest-index entering rule is the right tool.
Basis systems are refactorized from scratch every pivot; no external LP
code is involved.
"""

import numpy as np

from .errors import LpInfeasibleError, LpUnboundedError

PIVOT_TOL = 1e-10
OPT_TOL = 1e-9
FEAS_TOL = 1e-9


class SimplexResult:
    def __init__(self, x, objective, basis):
        self.x = x
        self.objective = objective
        self.basis = basis


def _bland_min(d, candidates):
    """Lowest-index candidate with reduced cost below -OPT_TOL, else None."""
    for j in candidates:
        if d[j] < -OPT_TOL:
            return j
    return None


def _iterate(a, b, c, basis, allow):
    """Run simplex to optimality on  min c.x, A x = b, x >= 0.

    `basis` is the starting basic index list (must be feasible); `allow`
    marks columns eligible to enter.  Returns the final basic solution.
    """
    m, n = a.shape
    cols = [j for j in range(n) if allow[j]]
    max_iter = 50 * (m + n + 10)
    for _ in range(max_iter):
        bmat = a[:, basis]
        try:
            binv_b = np.linalg.solve(bmat, b)
            y = np.linalg.solve(bmat.T, c[basis])
        except np.linalg.LinAlgError as exc:
            raise LpUnboundedError(f"singular basis: {exc}") from exc
        d = c - y @ a
        enter = _bland_min(d, cols)
        if enter is None:
            x = np.zeros(n)
            x[basis] = binv_b
            return SimplexResult(x, float(c @ x), list(basis))
        w = np.linalg.solve(bmat, a[:, enter])
        ratio = np.inf
        leave_pos = -1
        leave_var = None
        for i in range(m):
            if w[i] > PIVOT_TOL:
                r = max(binv_b[i], 0.0) / w[i]
                better = r < ratio - PIVOT_TOL
                tie = abs(r - ratio) <= PIVOT_TOL
                if better or (tie and basis[i] < leave_var):
                    ratio = r
                    leave_pos = i
                    leave_var = basis[i]
        if leave_pos < 0:
            raise LpUnboundedError("no blocking variable in ratio test")
        basis[leave_pos] = enter
    raise LpUnboundedError("simplex iteration limit reached")


def solve(c_max, a_eq, b_eq, a_ub=None, b_ub=None):
    """Maximize c_max.x subject to equalities, <= rows, and x >= 0."""
    a_eq = np.asarray(a_eq, dtype=float)
    b_eq = np.asarray(b_eq, dtype=float).copy()
    n = a_eq.shape[1]
    if a_ub is None:
        a_ub = np.zeros((0, n))
        b_ub = np.zeros(0)
    a_ub = np.asarray(a_ub, dtype=float)
    b_ub = np.asarray(b_ub, dtype=float).copy()
    n_ub = a_ub.shape[0]

    # Stack [A_eq; A_ub], appending one slack per <= row.
    a = np.vstack([
        np.hstack([a_eq, np.zeros((a_eq.shape[0], n_ub))]),
        np.hstack([a_ub, np.eye(n_ub)]),
    ])
    b = np.concatenate([b_eq, b_ub])
    m = a.shape[0]
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # Phase 1: artificials on every row; slacks of rows not flipped could
    # serve directly, but uniform artificials keep the logic simple.
    n_tot = a.shape[1]
    a1 = np.hstack([a, np.eye(m)])
    c1 = np.concatenate([np.zeros(n_tot), np.ones(m)])
    basis = list(range(n_tot, n_tot + m))
    allow = np.ones(n_tot + m, dtype=bool)
    allow[n_tot:] = False  # artificials never re-enter
    res1 = _iterate(a1, b, c1, basis, allow)
    if res1.objective > 1e-7:
        raise LpInfeasibleError(
            f"phase-1 objective {res1.objective:.3e}; constraints inconsistent"
        )

    # Drive artificials out of the basis by pivoting on any nonzero
    # structural tableau entry; where none exists the corresponding
    # original row is a linear combination of the others and is dropped.
    basis = res1.basis
    stuck_rows = set()
    for pos in range(m):
        if basis[pos] < n_tot:
            continue
        binv = np.linalg.inv(a1[:, basis])
        row = binv[pos] @ a
        in_basis = set(basis)
        enter = next(
            (j for j in range(n_tot) if j not in in_basis and abs(row[j]) > 1e-9),
            None,
        )
        if enter is None:
            stuck_rows.add(basis[pos] - n_tot)
        else:
            basis[pos] = enter

    rows = [i for i in range(m) if i not in stuck_rows]
    a2 = a[rows]
    b2 = b[rows]
    basis2 = [v for v in basis if v < n_tot]

    c2 = np.concatenate([-np.asarray(c_max, dtype=float), np.zeros(n_ub)])
    allow2 = np.ones(n_tot, dtype=bool)
    res2 = _iterate(a2, b2, c2, basis2, allow2)
    x = res2.x[:n]
    return SimplexResult(x, float(np.asarray(c_max) @ x), res2.basis)
