"""Turn a :class:`ScenarioConfig` into data, parameters and strategy runs."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .config import ESTIMATE, ScenarioConfig
from .epi import (
    AllocationPlan,
    CountyState,
    DiseaseParams,
    ObservedSeries,
    Trace,
    cumulative_confirmed,
    infection_rate_policy,
    initial_state_from_observations,
    load_case_series,
    plan_by_population,
    run,
    simulate,
)
from .errors import ConfigError, RateTooLarge, TooFewDays
from .est import (
    FITTERS,
    ClinicalInputs,
    EstimationResult,
    clinical_rates,
    estimate_h0,
    hidden_from_confirmed,
)
from .net import CommuteWeights, DistanceTable, build_weights, load_tables
from .opt import FrankWolfeResult, SurrogateInstance, frank_wolfe


@dataclass
class Scenario:
    config: ScenarioConfig
    dist: DistanceTable
    N: np.ndarray
    obs: ObservedSeries | None
    params: DiseaseParams
    lam: float
    weights: CommuteWeights
    initial: CountyState
    first_day_counts: np.ndarray
    budget: float
    a_max: float
    estimation: EstimationResult | None = None

    @property
    def labels(self) -> tuple[str, ...]:
        return self.dist.labels

    def resolved(self) -> dict:
        """The config with every parameter filled in, for embedding in outputs."""
        d = self.config.as_dict()
        d.update(
            alpha=self.params.alpha,
            beta=self.params.beta,
            gamma=self.params.gamma,
            lam=self.lam,
            budget=self.budget,
            a_max=self.a_max,
        )
        if self.estimation is not None:
            d["estimation"] = {
                "estimator": self.estimation.estimator_id,
                "objective": self.estimation.objective_value,
            }
        return d

    def instance(self) -> SurrogateInstance:
        c = self.config
        return SurrogateInstance(
            self.params,
            self.weights,
            self.N,
            self.initial.h,
            c.t0,
            c.T,
            self.budget,
            self.a_max,
            c.mode,
            c.fairness_delta,
        )


def _split_history(obs: ObservedSeries, start: str | None):
    """(history, start row index or None)."""
    if start is None:
        return obs, None
    k = obs.row_of(start)
    return obs.slice(0, k), k


def disease_rates(config: ScenarioConfig) -> tuple[float, float]:
    beta, gamma = config.beta, config.gamma
    if ESTIMATE in (beta, gamma):
        b_hat, g_hat = clinical_rates(ClinicalInputs(config.delta_a, config.d_h, config.d_r))
        beta = b_hat if beta == ESTIMATE else beta
        gamma = g_hat if gamma == ESTIMATE else gamma
    return float(beta), float(gamma)


def fit_history(config: ScenarioConfig, dist, obs, beta, gamma, force_both=False) -> tuple[EstimationResult, np.ndarray]:
    """Fit (alpha, lambda) on the rows before ``start`` and forecast h0.

    A parameter given as a number is pinned unless ``force_both``.
    """
    history, _ = _split_history(obs, config.start)
    if history.n_days < 3:
        raise TooFewDays(f"pre-intervention window has {history.n_days} days, need at least 3")
    search = config.search
    if not force_both:
        if config.alpha != ESTIMATE:
            search = dataclasses.replace(search, alpha_min=config.alpha, alpha_max=config.alpha)
        if config.lam != ESTIMATE:
            search = dataclasses.replace(search, lambda_min=config.lam, lambda_max=config.lam)
    result = FITTERS[config.estimator](history, beta, gamma, dist, search)
    prepared = history
    if search.smoothing_window and search.smoothing_window > 1:
        prepared = prepared.smoothed(search.smoothing_window)
    hidden = hidden_from_confirmed(prepared, beta)
    h0 = estimate_h0(hidden, result.alpha_hat, result.lambda_hat, beta, gamma, dist)
    return result, h0


def load_scenario(config: ScenarioConfig) -> Scenario:
    dist, N = load_tables(config.distances, config.populations)
    obs = load_case_series(config.cases, dist.labels, N) if config.cases is not None else None
    beta, gamma = disease_rates(config)

    estimation = None
    if config.needs_fit:
        if obs is None:
            raise ConfigError("estimating alpha or lambda needs a case series")
        estimation, h0 = fit_history(config, dist, obs, beta, gamma)
        alpha, lam = estimation.alpha_hat, estimation.lambda_hat
        initial = CountyState.from_hidden(h0)
    else:
        alpha, lam = float(config.alpha), float(config.lam)
        if obs is None or config.start is None:
            raise ConfigError("known parameters need a case series and a [horizon] start day")
        initial = initial_state_from_observations(obs, beta, obs.row_of(config.start))

    params = DiseaseParams(alpha, beta, gamma)
    weights = build_weights(dist, lam)
    a_max = params.default_rate_cap if config.a_max is None else float(config.a_max)
    if params.outflow + a_max > 1.0 + 1e-12:
        raise RateTooLarge(f"beta + gamma + a_max = {params.outflow + a_max:.6g} exceeds 1")
    budget = config.budget if config.budget is not None else config.budget_fraction * N.sum()

    first = None
    if obs is not None and config.start is not None:
        k = obs.row_of(config.start)
        if k > 0:
            first = obs.C_new[k - 1]
    if first is None:
        first = params.beta * N * initial.h
    return Scenario(config, dist, N, obs, params, lam, weights, initial, np.asarray(first, dtype=float), float(budget), a_max, estimation)


def network_plan(scn: Scenario, verify_lp: bool = False, log_path=None) -> FrankWolfeResult:
    c = scn.config
    result = frank_wolfe(
        scn.instance(),
        iterations=c.iterations,
        verify_lp=verify_lp,
        log_path=log_path,
        polish=c.polish,
    )
    result.plan.validate(scn.N, scn.a_max)
    return result


def run_strategy(scn: Scenario, name: str, plan: AllocationPlan | None = None) -> Trace:
    """Simulate one strategy from the shared initial state."""
    c = scn.config
    if name == "none":
        plan = AllocationPlan.zeros(len(scn.N), c.t0, c.T, scn.budget, c.mode)
    elif name == "population":
        plan = plan_by_population(scn.N, scn.budget, c.t0, c.T, scn.a_max, c.mode)
    elif name == "infection_rate":
        policy = infection_rate_policy(scn.N, scn.budget, scn.a_max, scn.first_day_counts)
        return run(scn.initial, scn.params, scn.weights, scn.N, c.t0, c.T, policy, mode=c.mode)
    elif name == "network":
        if plan is None:
            plan = network_plan(scn).plan
    else:
        raise ConfigError(f"unknown strategy {name!r}")
    return simulate(scn.initial, scn.params, scn.weights, scn.N, plan)


@dataclass
class ComparisonReport:
    days: np.ndarray
    cumulative: dict = field(default_factory=dict)
    county_totals: dict = field(default_factory=dict)
    allocations: np.ndarray | None = None
    fw: FrankWolfeResult | None = None


def compare(scn: Scenario, verify_lp: bool = False, log_path=None) -> ComparisonReport:
    """Paired comparison of every configured strategy on the same outbreak."""
    c = scn.config
    report = ComparisonReport(days=np.arange(c.t0, c.T + 1))
    for name in c.strategies:
        plan = None
        if name == "network":
            report.fw = network_plan(scn, verify_lp=verify_lp, log_path=log_path)
            plan = report.fw.plan
            report.allocations = plan.rates
        trace = run_strategy(scn, name, plan)
        report.cumulative[name] = cumulative_confirmed(trace)
        report.county_totals[name] = trace.new_confirmed.sum(axis=0)
    return report
