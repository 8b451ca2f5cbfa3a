"""Four-compartment (S, H, C, R) epidemic on a commute network of counties.

Every quantity is a fraction of the county population except where noted.
Time advances in whole days with a forward-Euler step. Hidden cases (H) are
infectious and undiagnosed; they leave H either by being confirmed (baseline
rate ``beta`` plus any screening rate) or by recovering (``gamma``).

Day indexing: a plan covers days ``t0..T``. Row ``k`` of the rate matrix is
applied to the state of day ``t0 - 1 + k`` and produces the state and the
newly confirmed counts of day ``t0 + k``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatch,
    InfeasiblePlan,
    LabelMismatch,
    MissingRow,
    NegativeCompartmentWarning,
    ParseError,
    ProbabilityOverflow,
    RateTooLarge,
    ValidationError,
    ZeroBeta,
)
from .net import CommuteWeights
from .tables import parse_float, read_rows

SCREENING = "screening"
VACCINATION = "vaccination"
MODES = (SCREENING, VACCINATION)

BUDGET_SLACK = 1e-9
RATE_TOL = 1e-12
NEG_TOL = 1e-12


@dataclass(frozen=True)
class DiseaseParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.beta <= 0 or self.gamma <= 0:
            raise ValidationError("beta and gamma must be positive")
        if self.beta + self.gamma >= 1.0:
            raise RateTooLarge(f"beta + gamma = {self.beta + self.gamma} must be < 1")

    @property
    def outflow(self) -> float:
        return self.beta + self.gamma

    @property
    def default_rate_cap(self) -> float:
        return 1.0 - self.beta - self.gamma


@dataclass(frozen=True)
class CountyState:
    s: np.ndarray
    h: np.ndarray
    c: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        arrs = [np.array(getattr(self, k), dtype=float).reshape(-1) for k in "shcr"]
        if len({a.shape for a in arrs}) != 1:
            raise DimensionMismatch("compartment vectors must have equal length")
        for k, a in zip("shcr", arrs):
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise ValidationError(f"compartment {k} must be finite and non-negative")
            a.setflags(write=False)
            object.__setattr__(self, k, a)

    @property
    def n(self) -> int:
        return self.s.shape[0]

    def total(self) -> np.ndarray:
        return self.s + self.h + self.c + self.r

    @classmethod
    def from_hidden(cls, h, s=None) -> "CountyState":
        h = np.asarray(h, dtype=float)
        z = np.zeros_like(h)
        return cls(np.ones_like(h) if s is None else s, h, z, z)


@dataclass(frozen=True)
class AllocationPlan:
    t0: int
    T: int
    rates: np.ndarray
    budget: float
    mode: str = SCREENING

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        if rates.ndim != 2:
            raise DimensionMismatch("rates must be a (days x counties) matrix")
        if self.T < self.t0:
            raise ValidationError(f"T={self.T} precedes t0={self.t0}")
        if rates.shape[0] != self.T - self.t0 + 1:
            raise DimensionMismatch(
                f"plan has {rates.shape[0]} rows, horizon {self.t0}..{self.T} needs {self.T - self.t0 + 1}"
            )
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.t0, self.T + 1)

    @property
    def n(self) -> int:
        return self.rates.shape[1]

    def usage(self, N) -> np.ndarray:
        """Tests (or doses) spent per day."""
        return self.rates @ np.asarray(N, dtype=float)

    def validate(self, N, a_max: float) -> None:
        N = np.asarray(N, dtype=float)
        if N.shape != (self.n,):
            raise DimensionMismatch(f"plan covers {self.n} counties, population has {N.shape[0]}")
        if np.any(self.rates < 0):
            raise InfeasiblePlan("rates must be non-negative")
        if np.any(self.rates > a_max + RATE_TOL):
            raise InfeasiblePlan(f"a rate exceeds the cap a_max={a_max}")
        used = self.usage(N)
        if np.any(used > self.budget + BUDGET_SLACK):
            k = int(np.argmax(used))
            raise InfeasiblePlan(f"day {self.t0 + k} uses {used[k]} > budget {self.budget}")
        if self.mode == VACCINATION and np.any(self.rates.sum(axis=0) > 1.0 + RATE_TOL):
            raise InfeasiblePlan("cumulative vaccination rate exceeds 1 in some county")

    @classmethod
    def zeros(cls, n: int, t0: int, T: int, budget: float = 0.0, mode: str = SCREENING):
        return cls(t0, T, np.zeros((T - t0 + 1, n)), budget, mode)


@dataclass(frozen=True)
class Trace:
    """States for days ``t0-1..T`` plus per-day counts of newly confirmed persons."""

    t0: int
    T: int
    s: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    new_confirmed: np.ndarray = field(repr=False)
    rates: np.ndarray = field(repr=False)
    mode: str = SCREENING
    flags: tuple = ()

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.t0 - 1, self.T + 1)

    def state(self, k: int) -> CountyState:
        """State at row ``k`` (row 0 is day ``t0 - 1``)."""
        return CountyState(self.s[k], self.h[k], self.c[k], self.r[k])


@dataclass(frozen=True)
class ObservedSeries:
    labels: tuple[str, ...]
    days: tuple[str, ...]
    N: np.ndarray
    C_new: np.ndarray

    def __post_init__(self):
        N = np.asarray(self.N, dtype=float).reshape(-1)
        C = np.asarray(self.C_new, dtype=float)
        if C.ndim != 2 or C.shape[1] != N.shape[0] or len(self.labels) != N.shape[0]:
            raise DimensionMismatch("case matrix, labels and populations disagree in size")
        if len(self.days) != C.shape[0]:
            raise DimensionMismatch("one day label per case row is required")
        if np.any(C < 0) or not np.all(np.isfinite(C)):
            raise ValidationError("case counts must be finite and non-negative")
        if np.any(N <= 0):
            raise ValidationError("populations must be positive")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "C_new", C)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "days", tuple(str(d) for d in self.days))

    @property
    def n_days(self) -> int:
        return self.C_new.shape[0]

    def row_of(self, day) -> int:
        try:
            return self.days.index(str(day))
        except ValueError:
            raise MissingRow(f"no case row for day {day!r}") from None

    def slice(self, start: int, stop: int) -> "ObservedSeries":
        return ObservedSeries(self.labels, self.days[start:stop], self.N, self.C_new[start:stop])

    def smoothed(self, window: int = 7) -> "ObservedSeries":
        """Centered moving average; the window shrinks at both ends."""
        if window <= 1:
            return self
        half = window // 2
        C = self.C_new
        out = np.empty_like(C)
        for k in range(C.shape[0]):
            lo, hi = max(0, k - half), min(C.shape[0], k + half + 1)
            out[k] = C[lo:hi].mean(axis=0)
        return ObservedSeries(self.labels, self.days, self.N, out)


def load_case_series(path, labels, N) -> ObservedSeries:
    """Read one row per day (first column = day label), one column per county."""
    rows = read_rows(path)
    header = rows[0][1:]
    labels = list(labels)
    if sorted(header) != sorted(labels):
        raise LabelMismatch(f"{path}: case columns {header} do not match counties {labels}")
    order = [header.index(lab) for lab in labels]
    days, values = [], []
    for r, row in enumerate(rows[1:]):
        if len(row) != len(header) + 1:
            raise ParseError(f"expected {len(header) + 1} cells, found {len(row)}", path=path, line=r + 2)
        days.append(row[0])
        vals = [parse_float(c, path=path, line=r + 2) for c in row[1:]]
        values.append([vals[k] for k in order])
    if not values:
        raise ParseError("no case rows", path=path)
    C = np.array(values, dtype=float)
    if np.any(C < 0):
        raise ValidationError(f"{path}: negative case count")
    return ObservedSeries(tuple(labels), tuple(days), N, C)


def infection_prob(h, weights: CommuteWeights, alpha: float) -> np.ndarray:
    """Per-county probability that a susceptible person is infected in one day.

    ``p_i = 1 - prod_j (1 - alpha * w_ij * h_j)``.
    """
    h = np.asarray(h, dtype=float)
    terms = alpha * weights.W * h[None, :]
    if np.any(terms > 1.0 + RATE_TOL):
        raise ProbabilityOverflow(f"alpha * w_ij * h_j reaches {terms.max():.6g} > 1")
    terms = np.minimum(terms, 1.0)
    # log-space product keeps full relative precision when every term is tiny
    with np.errstate(divide="ignore"):
        p = -np.expm1(np.log1p(-terms).sum(axis=1))
    return np.clip(p, 0.0, 1.0)


def _clamp(name: str, x: np.ndarray, flags: list) -> np.ndarray:
    if np.any(x < 0):
        if np.any(x < -NEG_TOL):
            msg = f"compartment {name} reached {x.min():.3g}; clamped to 0"
            warnings.warn(msg, NegativeCompartmentWarning, stacklevel=3)
            flags.append(msg)
        x = np.maximum(x, 0.0)
    return x


def _check_rates(a: np.ndarray, params: DiseaseParams, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise DimensionMismatch(f"rate vector has shape {a.shape}, expected ({n},)")
    if np.any(a < 0):
        raise ValidationError("rates must be non-negative")
    return a


def step_screening(state: CountyState, params: DiseaseParams, weights: CommuteWeights, a, flags=None, p=None):
    """Advance one day under testing rates ``a``.

    Returns the next state and the newly confirmed fractions ``(beta + a) * h``.
    """
    a = _check_rates(a, params, state.n)
    if np.any(params.outflow + a > 1.0 + RATE_TOL):
        raise RateTooLarge(f"beta + gamma + a reaches {params.outflow + a.max():.6g} > 1")
    flags = [] if flags is None else flags
    s, h, c, r = state.s, state.h, state.c, state.r
    if p is None:
        p = infection_prob(h, weights, params.alpha)
    infected = p * s
    confirmed = (params.beta + a) * h
    s1 = _clamp("s", s - infected, flags)
    h1 = _clamp("h", h + infected - confirmed - params.gamma * h, flags)
    c1 = _clamp("c", c + confirmed - params.gamma * c, flags)
    r1 = _clamp("r", r + params.gamma * (h + c), flags)
    return CountyState(s1, h1, c1, r1), confirmed


def step_vaccine(state: CountyState, params: DiseaseParams, weights: CommuteWeights, v, flags=None, p=None):
    """Advance one day under vaccination rates ``v`` (moves S straight to R)."""
    v = _check_rates(v, params, state.n)
    flags = [] if flags is None else flags
    s, h, c, r = state.s, state.h, state.c, state.r
    if p is None:
        p = infection_prob(h, weights, params.alpha)
    if np.any(p + v > 1.0 + RATE_TOL):
        raise RateTooLarge(f"infection probability plus vaccination rate reaches {(p + v).max():.6g} > 1")
    infected = p * s
    vaccinated = v * s
    confirmed = params.beta * h
    s1 = _clamp("s", s - infected - vaccinated, flags)
    h1 = _clamp("h", h + infected - confirmed - params.gamma * h, flags)
    c1 = _clamp("c", c + confirmed - params.gamma * c, flags)
    r1 = _clamp("r", r + params.gamma * (h + c) + vaccinated, flags)
    return CountyState(s1, h1, c1, r1), confirmed


RatePolicy = Callable[[int, CountyState, np.ndarray], np.ndarray]


def run(
    initial: CountyState,
    params: DiseaseParams,
    weights: CommuteWeights,
    N,
    t0: int,
    T: int,
    policy: RatePolicy,
    mode: str = SCREENING,
    hold_susceptible: bool = False,
) -> Trace:
    """Simulate days ``t0..T`` with rates chosen by ``policy(k, state, last_new_confirmed)``.

    ``last_new_confirmed`` is the count vector produced by the previous step
    (``None`` on the first step). With ``hold_susceptible`` the susceptible
    fraction is pinned to its initial value (early-epidemic linearization).
    """
    N = np.asarray(N, dtype=float)
    n = initial.n
    if N.shape != (n,) or weights.n != n:
        raise DimensionMismatch("state, populations and weights disagree in size")
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    step = step_screening if mode == SCREENING else step_vaccine
    days = T - t0 + 1
    out = {k: np.empty((days + 1, n)) for k in "shcr"}
    new_conf = np.empty((days, n))
    rates = np.empty((days, n))
    flags: list = []
    state = initial
    for name in "shcr":
        out[name][0] = getattr(initial, name)
    last = None
    for k in range(days):
        a = np.asarray(policy(k, state, last), dtype=float)
        rates[k] = a
        state, frac = step(state, params, weights, a, flags)
        if hold_susceptible:
            state = CountyState(initial.s, state.h, state.c, state.r)
        last = frac * N
        new_conf[k] = last
        for name in "shcr":
            out[name][k + 1] = getattr(state, name)
    return Trace(t0, T, out["s"], out["h"], out["c"], out["r"], new_conf, rates, mode, tuple(flags))


def simulate(
    initial: CountyState,
    params: DiseaseParams,
    weights: CommuteWeights,
    N,
    plan: AllocationPlan,
    hold_susceptible: bool = False,
) -> Trace:
    """Run a fixed allocation plan; deterministic for identical inputs."""
    if plan.n != initial.n:
        raise DimensionMismatch(f"plan covers {plan.n} counties, state has {initial.n}")
    return run(
        initial,
        params,
        weights,
        N,
        plan.t0,
        plan.T,
        lambda k, state, last: plan.rates[k],
        mode=plan.mode,
        hold_susceptible=hold_susceptible,
    )


def cumulative_confirmed(trace: Trace) -> np.ndarray:
    """Running total of newly confirmed persons over all counties, per day."""
    return np.cumsum(trace.new_confirmed.sum(axis=1))


def initial_state_from_observations(obs: ObservedSeries, beta: float, t0_index: int, confirmed=None) -> CountyState:
    """State on the day before screening starts, from the counts of the first day.

    Hidden cases are backed out of day ``t0`` confirmations, ``H = C_new / beta``;
    everyone is treated as susceptible and nobody as removed. ``confirmed``
    optionally gives currently confirmed persons per county.
    """
    if beta <= 0:
        raise ZeroBeta("beta must be positive to back out hidden cases")
    if not 0 <= t0_index < obs.n_days:
        raise MissingRow(f"case series has no row {t0_index}")
    h = obs.C_new[t0_index] / (beta * obs.N)
    c = np.zeros_like(h) if confirmed is None else np.asarray(confirmed, dtype=float) / obs.N
    return CountyState(np.ones_like(h), h, c, np.zeros_like(h))


def plan_by_population(N, M: float, t0: int, T: int, a_max: float = 1.0, mode: str = SCREENING) -> AllocationPlan:
    """Flat rate ``M / sum(N)`` for every county and day, capped at ``a_max``."""
    N = np.asarray(N, dtype=float)
    rate = min(M / N.sum(), a_max)
    return AllocationPlan(t0, T, np.full((T - t0 + 1, N.shape[0]), rate), M, mode)


def plan_by_infection_rate(prev_new_confirmed, N, M: float, a_max: float = 1.0) -> np.ndarray:
    """One day of rates proportional to ``C_new(t-1) / N``.

    Counties that hit ``a_max`` are capped and their excess is shared among
    the others in proportion to their scores. An all-zero input falls back
    to the flat rate.
    """
    N = np.asarray(N, dtype=float)
    score = np.asarray(prev_new_confirmed, dtype=float) / N
    if np.any(score < 0):
        raise ValidationError("newly confirmed counts must be non-negative")
    if not np.any(score > 0):
        return np.full(N.shape, min(M / N.sum(), a_max))
    score = score / score.max()
    a = np.zeros_like(N)
    capped = np.zeros(N.shape, dtype=bool)
    while True:
        free = (score > 0) & ~capped
        if not np.any(free):
            break
        remaining = M - np.dot(N[capped], a[capped])
        trial = remaining / np.dot(N[free], score[free]) * score
        over = free & (trial > a_max)
        if not np.any(over):
            a[free] = trial[free]
            break
        a[over] = a_max
        capped |= over
    return a


def infection_rate_policy(N, M: float, a_max: float, first_day_counts) -> RatePolicy:
    """Daily re-targeting on the previous day's simulated confirmations."""
    first = np.asarray(first_day_counts, dtype=float)

    def policy(k, state, last):
        prev = first if last is None else last
        return plan_by_infection_rate(prev, N, M, a_max)

    return policy
