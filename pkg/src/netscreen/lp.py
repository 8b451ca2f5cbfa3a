"""Linear programs for the Frank-Wolfe direction-finding step.

``simplex_solve`` is a general dense tableau simplex for

    min c @ x   s.t.   A @ x <= b,   0 <= x <= u

with upper bounds handled implicitly (a nonbasic variable sits at either of
its bounds), so box constraints do not add tableau rows. ``budget_oracle``
solves the single-budget special case in closed form and serves as an
independent check on the simplex code.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
COST_TOL = 1e-12


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    status: str
    iterations: int = 0


@dataclass(frozen=True)
class BudgetLp:
    """min c @ x  s.t.  N @ x <= M,  0 <= x <= upper."""

    c: np.ndarray
    N: np.ndarray
    M: float
    upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        N = np.asarray(self.N, dtype=float).reshape(-1)
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), c.shape).copy()
        if N.shape != c.shape:
            raise ValidationError("cost and population vectors differ in length")
        if np.any(N <= 0):
            raise ValidationError("populations must be positive")
        if self.M < 0 or np.any(upper < 0):
            raise ValidationError("budget and caps must be non-negative")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "M", float(self.M))

    def standard_form(self):
        """``(c, A, b, u)`` for :func:`simplex_solve`."""
        return self.c, self.N[None, :], np.array([self.M]), self.upper


class _Tableau:
    """Dense tableau ``B^-1 [A | I | art]`` with bounded variables."""

    def __init__(self, A, b, upper, verbose=False):
        m, n = A.shape
        neg = b < 0
        k = int(neg.sum())
        sign = np.where(neg, -1.0, 1.0)
        # columns: structural x, one slack per row, one artificial per negative row
        T = np.zeros((m, n + m + k))
        T[:, :n] = A * sign[:, None]
        T[:, n : n + m] = np.diag(sign)
        art_rows = np.flatnonzero(neg)
        for j, row in enumerate(art_rows):
            T[row, n + m + j] = 1.0
        self.T = T
        self.rhs = b * sign
        self.lower = np.zeros(n + m + k)
        self.upper = np.concatenate([upper, np.full(m, np.inf), np.full(k, np.inf)])
        self.value = np.zeros(n + m + k)
        self.basis = np.empty(m, dtype=int)
        for row in range(m):
            self.basis[row] = n + row
        for j, row in enumerate(art_rows):
            self.basis[row] = n + m + j
        self.value[self.basis] = self.rhs
        self.at_upper = np.zeros(n + m + k, dtype=bool)
        self.n, self.m, self.k = n, m, k
        self.verbose = verbose
        self.iterations = 0

    @property
    def artificial(self) -> slice:
        return slice(self.n + self.m, self.n + self.m + self.k)

    def reduced_costs(self, cost):
        return cost - cost[self.basis] @ self.T

    def pivot(self, row, col):
        T = self.T
        T[row] /= T[row, col]
        factor = T[:, col].copy()
        factor[row] = 0.0
        T -= np.outer(factor, T[row])
        self.basis[row] = col

    def optimize(self, cost) -> str:
        """Primal simplex from the current basic feasible solution."""
        m, nv = self.T.shape
        fixed = self.upper - self.lower <= 0
        d = self.reduced_costs(cost)
        degenerate = 0
        bland = False
        limit = 2 * (m + nv)
        while True:
            basic = np.zeros(nv, dtype=bool)
            basic[self.basis] = True
            at_upper = self.at_upper & ~basic
            gain = np.where(at_upper, d, -d)
            gain[basic | fixed] = 0.0
            candidates = np.flatnonzero(gain > COST_TOL * max(1.0, np.abs(cost).max()))
            if candidates.size == 0:
                return OPTIMAL
            if bland:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmax(gain[candidates])])
            direction = -1.0 if at_upper[col] else 1.0
            alpha = -direction * self.T[:, col]

            step = self.upper[col] - self.lower[col]
            leave, leave_to = -1, None
            for row in range(m):
                a = alpha[row]
                var = self.basis[row]
                if a < -PIVOT_TOL:
                    limit_r = (self.value[var] - self.lower[var]) / -a
                    bound = self.lower[var]
                elif a > PIVOT_TOL and np.isfinite(self.upper[var]):
                    limit_r = (self.upper[var] - self.value[var]) / a
                    bound = self.upper[var]
                else:
                    continue
                limit_r = max(limit_r, 0.0)
                if limit_r < step - 1e-15 or (
                    leave >= 0 and abs(limit_r - step) <= 1e-15 and var < self.basis[leave]
                ):
                    step, leave, leave_to = limit_r, row, bound
            if not np.isfinite(step):
                return UNBOUNDED

            self.iterations += 1
            if self.verbose:
                log.debug(
                    "iter %d: enter %d (dir %+d), leave %s, step %.6g",
                    self.iterations,
                    col,
                    int(direction),
                    "bound-flip" if leave < 0 else int(self.basis[leave]),
                    step,
                )
            self.value[col] += direction * step
            self.value[self.basis] += alpha * step
            if leave < 0:
                self.at_upper[col] = direction > 0
                self.value[col] = self.upper[col] if direction > 0 else self.lower[col]
            else:
                var = self.basis[leave]
                self.value[var] = leave_to
                self.at_upper[var] = leave_to == self.upper[var] and leave_to != self.lower[var]
                self.at_upper[col] = False
                self.pivot(leave, col)
                d = d - d[col] * self.T[leave]
                d[col] = 0.0

            if step <= 1e-15:
                degenerate += 1
                if degenerate > limit:
                    bland = True
            if self.iterations > 50 * limit:
                raise RuntimeError("simplex failed to terminate")


def simplex_solve(c, A, b, u=None, verbose: bool = False) -> LpSolution:
    """Solve ``min c@x, A@x <= b, 0 <= x <= u`` by the two-phase simplex method.

    Dantzig's most-negative reduced cost rule picks the entering variable
    until too many degenerate pivots accumulate, after which Bland's rule
    takes over. Infeasible and unbounded problems are reported through
    ``status``, never raised.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n = c.shape[0]
    u = np.full(n, np.inf) if u is None else np.broadcast_to(np.asarray(u, dtype=float), (n,)).copy()
    if A.shape != (b.shape[0], n):
        raise ValidationError(f"constraint matrix has shape {A.shape}, expected ({b.shape[0]}, {n})")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValidationError("LP data must be finite")
    if np.any(u < 0):
        return LpSolution(np.zeros(n), np.nan, INFEASIBLE)

    tab = _Tableau(A, b, u, verbose=verbose)
    if tab.k:
        phase1 = np.zeros(tab.T.shape[1])
        phase1[tab.artificial] = 1.0
        tab.optimize(phase1)
        infeas = tab.value[tab.artificial].sum()
        if infeas > FEAS_TOL * max(1.0, np.abs(b).max()):
            return LpSolution(np.zeros(n), np.nan, INFEASIBLE, tab.iterations)
        # artificials are pinned to zero from here on
        tab.upper[tab.artificial] = 0.0
        tab.value[tab.artificial] = np.minimum(tab.value[tab.artificial], 0.0)

    cost = np.zeros(tab.T.shape[1])
    cost[:n] = c
    status = tab.optimize(cost)
    x = np.clip(tab.value[:n], 0.0, u)
    if status != OPTIMAL:
        return LpSolution(x, np.nan, status, tab.iterations)
    return LpSolution(x, float(c @ x), OPTIMAL, tab.iterations)


def budget_oracle(lp: BudgetLp) -> LpSolution:
    """Closed-form optimum of the single-budget LP (fractional knapsack).

    Counties with negative cost are filled in order of increasing cost per
    person, each to its cap or until the budget runs out. Ties go to the
    lower index.
    """
    c, N, upper = lp.c, lp.N, lp.upper
    x = np.zeros_like(c)
    remaining = lp.M
    order = np.argsort(c / N, kind="stable")
    for i in order:
        if c[i] >= 0 or remaining <= 0:
            break
        x[i] = min(upper[i], remaining / N[i])
        remaining -= N[i] * x[i]
    return LpSolution(x, float(c @ x), OPTIMAL)


def solve_budget_lp(lp: BudgetLp) -> LpSolution:
    """The same problem through the general simplex code."""
    return simplex_solve(*lp.standard_form())
