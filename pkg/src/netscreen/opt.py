"""Screening and vaccination plans from a linear upper bound on hidden cases.

Holding ``s = 1`` and bounding the infection probability by its first-order
term gives ``h(t+1) <= U(t) h(t)`` with the nonnegative step matrix

    U(t) = (1 - beta - gamma) I - diag(a(t)) + alpha W.

The surrogate objective is the population-weighted sum of the propagated
bound over the horizon,

    F = N @ sum_{k=0}^{K} P_k h0,   P_0 = I,   P_{k+1} = U_k P_k,

with ``K = T - t0``. It is multilinear in the per-day rates and is minimized
by Frank-Wolfe over the per-day budget polytope. In vaccination mode
``U_k`` subtracts the cumulative rates ``v_0 + ... + v_k`` instead.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .epi import SCREENING, VACCINATION, AllocationPlan, DiseaseParams
from .errors import (
    DimensionMismatch,
    InfeasiblePlan,
    NegativeMatrixEntry,
    NonImprovementWarning,
    RateTooLarge,
    ValidationError,
)
from .lp import OPTIMAL, BudgetLp, budget_oracle, simplex_solve
from .net import CommuteWeights

MATRIX_TOL = 1e-12
LP_AGREEMENT_TOL = 1e-8


@dataclass(frozen=True)
class SurrogateInstance:
    params: DiseaseParams
    weights: CommuteWeights
    N: np.ndarray
    h0: np.ndarray
    t0: int
    T: int
    M: float
    a_max: float | None = None
    mode: str = SCREENING
    fairness_delta: float = 0.0

    def __post_init__(self):
        N = np.asarray(self.N, dtype=float).reshape(-1)
        h0 = np.asarray(self.h0, dtype=float).reshape(-1)
        a_max = self.params.default_rate_cap if self.a_max is None else float(self.a_max)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "a_max", a_max)
        n = self.weights.n
        if N.shape != (n,) or h0.shape != (n,):
            raise DimensionMismatch("populations, initial hidden fractions and weights disagree in size")
        if np.any(h0 < 0):
            raise ValidationError("initial hidden fractions must be non-negative")
        if np.any(N <= 0):
            raise ValidationError("populations must be positive")
        if self.T < self.t0:
            raise ValidationError(f"T={self.T} precedes t0={self.t0}")
        if self.M < 0:
            raise ValidationError("budget must be non-negative")
        if self.mode not in (SCREENING, VACCINATION):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.fairness_delta < 0:
            raise ValidationError("fairness penalty weight must be non-negative")
        if a_max < 0:
            raise ValidationError("a_max must be non-negative")
        slack = 1.0 - self.params.outflow - a_max + self.params.alpha * np.diag(self.weights.W).min()
        if slack < -MATRIX_TOL:
            raise RateTooLarge(
                f"a_max={a_max} can drive step-matrix diagonals negative (margin {slack:.3g})"
            )

    @property
    def n(self) -> int:
        return self.N.shape[0]

    @property
    def days(self) -> int:
        return self.T - self.t0 + 1

    @property
    def cumulative_cap(self) -> np.ndarray:
        """Largest total vaccination rate per county that keeps ``U_vac`` nonnegative (and <= 1)."""
        p = self.params
        return np.minimum(1.0, 1.0 - p.outflow + p.alpha * np.diag(self.weights.W))

    def zero_plan(self) -> AllocationPlan:
        return AllocationPlan.zeros(self.n, self.t0, self.T, self.M, self.mode)

    def plan(self, rates) -> AllocationPlan:
        return AllocationPlan(self.t0, self.T, rates, self.M, self.mode)


def _step_matrix(inst: SurrogateInstance, removal) -> np.ndarray:
    p = inst.params
    U = p.alpha * inst.weights.W + np.diag((1.0 - p.outflow) - np.asarray(removal, dtype=float))
    if U.min() < -MATRIX_TOL:
        raise NegativeMatrixEntry(f"step matrix has entry {U.min():.6g} < 0")
    return U


def build_step_matrix(inst: SurrogateInstance, a_t) -> np.ndarray:
    """``(1 - beta - gamma) I - diag(a_t) + alpha W``."""
    a_t = np.asarray(a_t, dtype=float)
    if np.any(a_t < 0) or np.any(a_t > inst.a_max + MATRIX_TOL):
        raise ValidationError("testing rates must lie in [0, a_max]")
    return _step_matrix(inst, a_t)


def build_step_matrix_vac(inst: SurrogateInstance, v_cumulative) -> np.ndarray:
    """Step matrix with the cumulative vaccination rates on the diagonal."""
    return _step_matrix(inst, v_cumulative)


def _removals(inst: SurrogateInstance, rates: np.ndarray) -> np.ndarray:
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (inst.days, inst.n):
        raise DimensionMismatch(f"plan rates have shape {rates.shape}, expected ({inst.days}, {inst.n})")
    if inst.mode == VACCINATION:
        return np.cumsum(rates, axis=0)
    return rates


def _rates_of(plan) -> np.ndarray:
    return plan.rates if isinstance(plan, AllocationPlan) else np.asarray(plan, dtype=float)


@dataclass
class _Sweep:
    """Forward bounds ``x_k = P_k h0`` and backward co-states."""

    x: np.ndarray  # (K+1, n)
    lam: np.ndarray  # (K+1, n): lam_k = N + U_k^T lam_{k+1}, lam_K = N
    value: float


def _sweep(inst: SurrogateInstance, rates: np.ndarray, backward: bool = True) -> _Sweep:
    removal = _removals(inst, rates)
    K = inst.days - 1
    n = inst.n
    mats = [_step_matrix(inst, removal[k]) for k in range(K)]
    x = np.empty((K + 1, n))
    x[0] = inst.h0
    for k in range(K):
        x[k + 1] = mats[k] @ x[k]
    value = float(inst.N @ x.sum(axis=0))
    lam = np.empty((K + 1, n))
    if backward:
        lam[K] = inst.N
        for k in range(K - 1, -1, -1):
            lam[k] = inst.N + mats[k].T @ lam[k + 1]
    return _Sweep(x, lam, value)


def _fairness(inst: SurrogateInstance, rates: np.ndarray) -> float:
    if inst.fairness_delta == 0:
        return 0.0
    dev = rates - rates.mean(axis=1, keepdims=True)
    return float(inst.fairness_delta * np.sum(dev**2))


def surrogate_objective(inst: SurrogateInstance, plan) -> float:
    """Upper bound on population-weighted hidden cases summed over the horizon."""
    rates = _rates_of(plan)
    return _sweep(inst, rates, backward=False).value + _fairness(inst, rates)


def surrogate_gradient(inst: SurrogateInstance, plan) -> np.ndarray:
    """Gradient with respect to every day's rates, shape ``(days, n)``.

    For screening, ``dF/da_k = -lam_{k+1} * x_k`` (zero on the last day,
    whose rates never enter the bound). A vaccination rate on day ``j``
    stays on the diagonal for every later day, so its gradient is the
    suffix sum of those terms.
    """
    rates = _rates_of(plan)
    sw = _sweep(inst, rates)
    K = inst.days - 1
    g = np.zeros((K + 1, inst.n))
    g[:K] = -sw.lam[1:] * sw.x[:K]
    if inst.mode == VACCINATION:
        g = np.cumsum(g[::-1], axis=0)[::-1]
    if inst.fairness_delta:
        g += 2.0 * inst.fairness_delta * (rates - rates.mean(axis=1, keepdims=True))
    return g


@dataclass
class FrankWolfeResult:
    plan: AllocationPlan
    objective: float
    initial_objective: float
    iterations: int
    history: list = field(default_factory=list)
    lp_checks: int = 0
    lp_discrepancies: int = 0
    stopped_early: bool = False
    polished_from: float | None = None


def _day_lmo(inst: SurrogateInstance, grad: np.ndarray, verify: bool, stats: dict) -> np.ndarray:
    out = np.zeros_like(grad)
    for k in range(grad.shape[0]):
        lp = BudgetLp(grad[k], inst.N, inst.M, inst.a_max)
        sol = budget_oracle(lp)
        out[k] = sol.x
        if verify:
            # compare on a unit-scale copy; scaling the cost leaves the argmin unchanged
            scale = max(np.abs(grad[k]).max(), 1e-300)
            scaled = BudgetLp(grad[k] / scale, inst.N, inst.M, inst.a_max)
            ref = simplex_solve(*scaled.standard_form())
            stats["checks"] += 1
            if ref.status != OPTIMAL or abs(ref.objective - budget_oracle(scaled).objective) > LP_AGREEMENT_TOL:
                stats["discrepancies"] += 1
    return out


def vaccination_lp(inst: SurrogateInstance, grad: np.ndarray):
    """Whole-horizon direction LP for vaccination.

    Per-day budgets and rate caps as for screening, plus a per-county cap on
    the rates summed over the horizon; the days are coupled, so this goes
    through the simplex solver.
    """
    D, n = grad.shape
    nv = D * n
    A = np.zeros((D + n, nv))
    for k in range(D):
        A[k, k * n : (k + 1) * n] = inst.N
    for i in range(n):
        A[D + i, i::n] = 1.0
    b = np.concatenate([np.full(D, inst.M), inst.cumulative_cap])
    scale = max(np.abs(grad).max(), 1e-300)
    sol = simplex_solve(grad.reshape(-1) / scale, A, b, np.full(nv, inst.a_max))
    if sol.status != OPTIMAL:
        raise InfeasiblePlan(f"vaccination direction LP returned {sol.status}")
    return sol.x.reshape(D, n)


def frank_wolfe(
    inst: SurrogateInstance,
    initial_plan: AllocationPlan | None = None,
    iterations: int = 200,
    rel_tol: float = 1e-8,
    patience: int = 5,
    verify_lp: bool = False,
    log_path=None,
    polish: bool = False,
) -> FrankWolfeResult:
    """Frank-Wolfe with the classic ``1/(k+1)`` step.

    The returned plan is the best iterate seen, so its objective never
    exceeds that of ``initial_plan``. Stops early (with a
    :class:`NonImprovementWarning`) once the best objective has improved by
    less than ``rel_tol`` relative for ``patience`` iterations in a row.
    With ``polish`` the result is passed through :func:`vertex_polish`.
    """
    if iterations < 1:
        raise ValidationError("at least one iteration is required")
    plan = inst.zero_plan() if initial_plan is None else initial_plan
    rates = np.array(plan.rates, dtype=float)
    if rates.shape != (inst.days, inst.n):
        raise DimensionMismatch("initial plan does not match the instance")
    inst.plan(rates).validate(inst.N, inst.a_max)

    f0 = surrogate_objective(inst, rates)
    best_rates, best_f = rates.copy(), f0
    stats = {"checks": 0, "discrepancies": 0}
    history = []
    stalled = 0
    stopped_early = False
    log_file = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    try:
        k = 0
        for k in range(iterations):
            grad = surrogate_gradient(inst, rates)
            if inst.mode == VACCINATION:
                target = vaccination_lp(inst, grad)
            else:
                target = _day_lmo(inst, grad, verify_lp, stats)
            step = 1.0 / (k + 1)
            new_rates = rates + step * (target - rates)
            step_norm = float(np.linalg.norm(new_rates - rates))
            rates = new_rates
            f = surrogate_objective(inst, rates)
            gain = best_f - f
            if f < best_f:
                best_rates, best_f = rates.copy(), f
            record = {
                "iteration": k + 1,
                "objective": f,
                "step_norm": step_norm,
                "support": [int(np.count_nonzero(row)) for row in rates],
            }
            history.append(record)
            if log_file is not None:
                log_file.write(json.dumps(record) + "\n")
            # stall = the best objective so far gained less than rel_tol
            stalled = stalled + 1 if gain < rel_tol * abs(best_f + max(gain, 0.0)) else 0
            if stalled >= patience:
                stopped_early = True
                warnings.warn(
                    f"Frank-Wolfe stalled after {k + 1} iterations (relative gain < {rel_tol})",
                    NonImprovementWarning,
                    stacklevel=2,
                )
                break
    finally:
        if log_file is not None:
            log_file.close()

    best_rates = np.clip(best_rates, 0.0, inst.a_max)
    polished_from = None
    if polish and inst.mode == SCREENING:
        polished_from = best_f
        best_rates, best_f = vertex_polish(inst, best_rates)
    if inst.mode == SCREENING:
        best_rates = _fill_last_day(inst, best_rates)
    out = inst.plan(best_rates)
    return FrankWolfeResult(
        plan=out,
        objective=best_f,
        initial_objective=f0,
        iterations=len(history),
        history=history,
        lp_checks=stats["checks"],
        lp_discrepancies=stats["discrepancies"],
        stopped_early=stopped_early,
        polished_from=polished_from,
    )


def _fill_last_day(inst: SurrogateInstance, rates: np.ndarray) -> np.ndarray:
    """Give the final day the previous day's rates.

    Tests on day T only act on h(T+1), which lies outside the bound, so that
    day's gradient is zero (without fairness) and the direction oracle leaves
    it empty. Repeating the day before spends the budget without changing
    the objective.
    """
    if inst.days < 2 or inst.fairness_delta:
        return rates
    rates = rates.copy()
    rates[-1] = rates[-2]
    return rates


def vertex_polish(inst: SurrogateInstance, rates, max_sweeps: int = 50):
    """Move each day in turn to its best budget vertex, holding the other days fixed.

    The screening bound is linear in any single day's rates, so the greedy
    vertex for that day's gradient is an exact minimizer along that block.
    A change is kept only if the objective strictly drops, which makes the
    sweep monotone and finite. Returns ``(rates, objective)``.
    """
    if inst.mode != SCREENING:
        raise ValidationError("vertex polishing applies to screening plans only")
    rates = np.array(_rates_of(rates), dtype=float)
    f = surrogate_objective(inst, rates)
    for _ in range(max_sweeps):
        changed = False
        for k in range(inst.days - 1):
            g = surrogate_gradient(inst, rates)[k]
            b = budget_oracle(BudgetLp(g, inst.N, inst.M, inst.a_max)).x
            if np.array_equal(b, rates[k]) or g @ (b - rates[k]) >= 0:
                continue
            trial = rates.copy()
            trial[k] = b
            ft = surrogate_objective(inst, trial)
            if ft < f:
                rates, f, changed = trial, ft, True
        if not changed:
            break
    return rates, f
