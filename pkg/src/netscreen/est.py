"""Parameter estimation from pre-intervention confirmed-case history.

``beta`` and ``gamma`` come from clinical constants. ``alpha`` and the
network scale ``lam`` are fitted to the hidden fractions implied by the
case counts, ``h_i(t) = C_new_i(t+1) / (N_i beta)``, by grid search with
local refinement. Row ``t`` of an :class:`~netscreen.epi.ObservedSeries`
gives ``h(t)`` directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .epi import ObservedSeries, infection_prob
from .errors import (
    AllCellsDropped,
    EmptySearchSpace,
    HiddenFractionWarning,
    ProbabilityOverflow,
    RateSumOverflow,
    TooFewDays,
    ValidationError,
    WeightOutOfRange,
    ZeroBeta,
)
from .net import DistanceTable, build_weights, lambda_max

LOGLINEAR = "loglinear"
TRAJECTORY = "trajectory"
EARLY_PHASE_LIMIT = 0.1


@dataclass(frozen=True)
class ClinicalInputs:
    delta_a: float
    d_h: float
    d_r: float

    def __post_init__(self):
        if not 0.0 <= self.delta_a <= 1.0:
            raise ValidationError(f"asymptomatic fraction must lie in [0, 1], got {self.delta_a}")
        if self.d_h <= 0 or self.d_r <= 0:
            raise ValidationError("incubation and recovery durations must be positive")


@dataclass(frozen=True)
class SearchSpec:
    alpha_min: float = 0.01
    alpha_max: float = 0.99
    lambda_min: float = 0.0
    lambda_max: float | None = None
    grid_size: int = 20
    refinement_rounds: int = 2
    smoothing_window: int = 1
    window: int | None = None

    def lambda_bounds(self, dist: DistanceTable) -> tuple[float, float]:
        cap = lambda_max(dist)
        if not np.isfinite(cap):
            cap = 0.0
        hi = cap if self.lambda_max is None else min(float(self.lambda_max), cap)
        return float(self.lambda_min), float(hi)

    def grid(self, dist: DistanceTable):
        lo_l, hi_l = self.lambda_bounds(dist)
        lo_a, hi_a = max(self.alpha_min, 0.0), min(self.alpha_max, 1.0)
        if self.grid_size < 1 or lo_a > hi_a or lo_l > hi_l or hi_a <= 0 or lo_a >= 1:
            raise EmptySearchSpace(
                f"alpha in [{self.alpha_min}, {self.alpha_max}], lambda in [{lo_l}, {hi_l}], "
                f"grid_size={self.grid_size}"
            )
        return np.linspace(lo_a, hi_a, self.grid_size), np.linspace(lo_l, hi_l, self.grid_size)


@dataclass(frozen=True)
class EstimationResult:
    alpha_hat: float
    lambda_hat: float
    objective_value: float
    estimator_id: str
    search_diagnostics: dict = field(default_factory=dict)


def clinical_rates(c: ClinicalInputs) -> tuple[float, float]:
    """Diagnosis and recovery rates from clinical durations.

    Only symptomatic cases are diagnosed without screening, after the
    incubation period; everyone recovers after ``d_r`` days on average.
    """
    beta = (1.0 - c.delta_a) / c.d_h
    gamma = 1.0 / c.d_r
    if beta + gamma >= 1.0:
        raise RateSumOverflow(f"beta + gamma = {beta + gamma:.4g} must be < 1")
    return beta, gamma


def hidden_from_confirmed(obs: ObservedSeries, beta_hat: float) -> np.ndarray:
    """Hidden fractions implied by newly confirmed counts, one row per day."""
    if beta_hat <= 0:
        raise ZeroBeta("beta must be positive")
    if obs.n_days < 2:
        raise TooFewDays(f"need at least 2 days of cases, got {obs.n_days}")
    h = obs.C_new / (obs.N * beta_hat)
    if np.any(h > 1.0):
        warnings.warn("some implied hidden fractions exceed 1", HiddenFractionWarning, stacklevel=2)
    return h


def forecast_hidden(h_start, alpha, lam, beta_hat, gamma_hat, dist: DistanceTable, steps: int, track_susceptible=True):
    """Forecast ``steps`` days of hidden fractions without intervention.

    Returns rows ``h(1)..h(steps)``. The susceptible fraction starts at 1 and
    is depleted by new infections unless ``track_susceptible`` is false, in
    which case it stays at 1.
    """
    weights = build_weights(dist, lam)
    h = np.asarray(h_start, dtype=float).copy()
    s = np.ones_like(h)
    keep = 1.0 - beta_hat - gamma_hat
    out = np.empty((steps, h.shape[0]))
    for k in range(steps):
        p = infection_prob(h, weights, alpha) if alpha > 0 else np.zeros_like(h)
        h = keep * h + p * s
        if track_susceptible:
            s = s * (1.0 - p)
        out[k] = h
    return out


def _loglinear_cells(hidden: np.ndarray) -> np.ndarray:
    # a cell (t, i) needs ln h_i(t), ln h_i(0) and 1/h_i(tau) for every tau < t
    return np.cumprod(hidden > 0, axis=0).astype(bool)


def loglinear_objective(hidden: np.ndarray, alpha, lam, beta_hat, gamma_hat, dist, cells=None, linearized=False) -> float:
    """Squared error of the cumulative log-growth forecast over usable cells.

    The residual of cell ``(t, i)`` is ``ln h_i(t) - ln h_i(0)`` minus the
    summed daily log growth. By default the daily growth is the exact
    ``ln(1 - beta - gamma + p s / h)`` of the one-day update, with ``s``
    depleted from 1 by the fitted infection probabilities. With
    ``linearized`` it is the first-order ``p / h - beta - gamma`` at ``s = 1``.
    """
    weights = build_weights(dist, lam)
    D = hidden.shape[0]
    cells = _loglinear_cells(hidden) if cells is None else cells
    P = np.array([infection_prob(hidden[t], weights, alpha) for t in range(D - 1)]).reshape(D - 1, -1)
    keep = 1.0 - beta_hat - gamma_hat
    usable = cells[: D - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        if linearized:
            growth = np.where(usable, P / hidden[: D - 1] - beta_hat - gamma_hat, 0.0)
        else:
            s = np.vstack([np.ones(hidden.shape[1]), np.cumprod(1.0 - P, axis=0)[:-1]]) if D > 1 else P
            growth = np.where(usable, np.log(keep + P * s / np.where(usable, hidden[: D - 1], 1.0)), 0.0)
        logs = np.where(cells, np.log(np.where(cells, hidden, 1.0)), 0.0)
    drift = np.vstack([np.zeros(hidden.shape[1]), np.cumsum(growth, axis=0)])
    resid = logs - logs[0] - drift
    return float(np.sum(np.where(cells, resid, 0.0) ** 2))


def trajectory_objective(hidden: np.ndarray, N, alpha, lam, beta_hat, gamma_hat, dist) -> float:
    """Per-county absolute error of the summed forecast, in persons."""
    D = hidden.shape[0]
    forecast = forecast_hidden(hidden[0], alpha, lam, beta_hat, gamma_hat, dist, D - 1)
    N = np.asarray(N, dtype=float)
    return float(np.sum(np.abs(N * hidden[1:].sum(axis=0) - N * forecast.sum(axis=0))))


def _grid_search(objective, spec: SearchSpec, dist: DistanceTable):
    """Coarse grid plus ``refinement_rounds`` finer grids around the incumbent.

    Ties are broken by (objective, alpha, lambda) so the answer does not
    depend on evaluation order.
    """
    alphas, lambdas = spec.grid(dist)
    a_lo, a_hi = alphas[0], alphas[-1]
    l_lo, l_hi = lambdas[0], lambdas[-1]
    cache: dict = {}

    def score(a, l):
        key = (float(a), float(l))
        if key not in cache:
            try:
                val = objective(*key)
            except (ProbabilityOverflow, WeightOutOfRange):
                val = np.inf
            cache[key] = val if np.isfinite(val) else np.inf
        return cache[key]

    def best_of(alist, llist, incumbent=None):
        cands = [(score(a, l), float(a), float(l)) for a in alist for l in llist]
        if incumbent is not None:
            cands.append(incumbent)
        return min(cands)

    best = best_of(alphas, lambdas)
    da = (a_hi - a_lo) / max(spec.grid_size - 1, 1)
    dl = (l_hi - l_lo) / max(spec.grid_size - 1, 1)
    rounds = []
    for _ in range(spec.refinement_rounds):
        _, a0, l0 = best
        fa = np.linspace(max(a_lo, a0 - da), min(a_hi, a0 + da), spec.grid_size)
        fl = np.linspace(max(l_lo, l0 - dl), min(l_hi, l0 + dl), spec.grid_size)
        best = best_of(fa, fl, incumbent=best)
        rounds.append({"alpha_range": [float(fa[0]), float(fa[-1])], "lambda_range": [float(fl[0]), float(fl[-1])]})
        da = (fa[-1] - fa[0]) / max(spec.grid_size - 1, 1)
        dl = (fl[-1] - fl[0]) / max(spec.grid_size - 1, 1)
    if not np.isfinite(best[0]):
        raise EmptySearchSpace("no grid point gave a finite objective")
    diagnostics = {
        "alpha_bounds": [float(a_lo), float(a_hi)],
        "lambda_bounds": [float(l_lo), float(l_hi)],
        "grid_size": spec.grid_size,
        "coarse_spacing": [float((a_hi - a_lo) / max(spec.grid_size - 1, 1)), float((l_hi - l_lo) / max(spec.grid_size - 1, 1))],
        "refinements": rounds,
        "evaluations": len(cache),
    }
    return best, diagnostics


def _prepare(obs: ObservedSeries, spec: SearchSpec) -> ObservedSeries:
    if spec.smoothing_window and spec.smoothing_window > 1:
        obs = obs.smoothed(spec.smoothing_window)
    if spec.window is not None:
        obs = obs.slice(max(0, obs.n_days - spec.window), obs.n_days)
    return obs


def _early_phase_check(hidden: np.ndarray, diagnostics: dict) -> None:
    peak = float(hidden.max()) if hidden.size else 0.0
    diagnostics["max_hidden"] = peak
    if peak > EARLY_PHASE_LIMIT:
        warnings.warn(
            f"implied hidden fraction reaches {peak:.3g}; the s ~ 1 approximation may not hold",
            HiddenFractionWarning,
            stacklevel=3,
        )


def fit_alpha_lambda_loglinear(
    obs, beta_hat, gamma_hat, dist, search: SearchSpec | None = None, linearized: bool = False
) -> EstimationResult:
    """Least squares on log hidden fractions against the cumulative growth forecast.

    Cells with a zero hidden fraction at the start, at the cell itself, or on
    any earlier day are dropped. ``linearized`` selects the first-order growth
    term (see :func:`loglinear_objective`).
    """
    search = search or SearchSpec()
    obs = _prepare(obs, search)
    hidden = hidden_from_confirmed(obs, beta_hat)
    cells = _loglinear_cells(hidden)
    cells[0] = False  # the t = 0 residual is identically zero
    if not cells.any():
        raise AllCellsDropped("every (county, day) cell has a zero hidden fraction in its history")
    cells_all = cells.copy()
    cells_all[0] = hidden[0] > 0

    def objective(a, l):
        return loglinear_objective(hidden, a, l, beta_hat, gamma_hat, dist, cells=cells_all, linearized=linearized)

    (val, a, l), diag = _grid_search(objective, search, dist)
    diag["dropped_cells"] = int((~cells[1:]).sum())
    diag["used_cells"] = int(cells.sum())
    diag["linearized"] = linearized
    _early_phase_check(hidden, diag)
    return EstimationResult(a, l, val, LOGLINEAR, diag)


def fit_alpha_lambda_trajectory(obs, beta_hat, gamma_hat, dist, search: SearchSpec | None = None) -> EstimationResult:
    """Match per-county summed forecasts (started from the first day) to the data."""
    search = search or SearchSpec()
    obs = _prepare(obs, search)
    if obs.n_days < 3:
        raise TooFewDays(f"need at least 3 days of cases, got {obs.n_days}")
    hidden = hidden_from_confirmed(obs, beta_hat)

    def objective(a, l):
        return trajectory_objective(hidden, obs.N, a, l, beta_hat, gamma_hat, dist)

    (val, a, l), diag = _grid_search(objective, search, dist)
    _early_phase_check(hidden, diag)
    return EstimationResult(a, l, val, TRAJECTORY, diag)


def estimate_h0(hidden, alpha_hat, lambda_hat, beta_hat, gamma_hat, dist: DistanceTable) -> np.ndarray:
    """One-step forecast from the last row of ``hidden`` (the day before screening)."""
    hidden = np.atleast_2d(np.asarray(hidden, dtype=float))
    if hidden.shape[0] < 1:
        raise TooFewDays("need at least one day of hidden fractions")
    last = hidden[-1]
    weights = build_weights(dist, lambda_hat)
    p = infection_prob(last, weights, alpha_hat) if alpha_hat > 0 else np.zeros_like(last)
    return (1.0 - beta_hat - gamma_hat) * last + p


FITTERS = {LOGLINEAR: fit_alpha_lambda_loglinear, TRAJECTORY: fit_alpha_lambda_trajectory}
