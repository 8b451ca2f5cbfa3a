import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import random_params, random_plan, random_state, random_weights
from netscreen.epi import (
    VACCINATION,
    AllocationPlan,
    CountyState,
    DiseaseParams,
    ObservedSeries,
    cumulative_confirmed,
    infection_prob,
    initial_state_from_observations,
    plan_by_infection_rate,
    plan_by_population,
    simulate,
    step_screening,
    step_vaccine,
)
from netscreen.errors import (
    DimensionMismatch,
    InfeasiblePlan,
    MissingRow,
    ProbabilityOverflow,
    RateTooLarge,
    ValidationError,
    ZeroBeta,
)
from netscreen.net import CommuteWeights

PARAMS = DiseaseParams(0.3, 0.16, 1 / 15)
PAIR = CommuteWeights(np.array([[0.8, 0.2], [0.2, 0.8]]), 20.0)


def one(s, h, c=0.0, r=0.0):
    return CountyState(np.array([s]), np.array([h]), np.array([c]), np.array([r]))


def test_params_validation():
    with pytest.raises(ValidationError):
        DiseaseParams(1.2, 0.1, 0.1)
    with pytest.raises(ValidationError):
        DiseaseParams(0.3, 0.6, 0.5)
    with pytest.raises(ValidationError):
        CountyState(np.array([-0.1]), np.array([0.0]), np.array([0.0]), np.array([0.0]))


def test_infection_prob_examples():
    assert np.array_equal(infection_prob(np.zeros(2), PAIR, 0.3), [0.0, 0.0])
    np.testing.assert_allclose(infection_prob(np.array([0.1, 0.05]), CommuteWeights.identity(2), 0.3), [0.03, 0.015], rtol=1e-14)
    p = infection_prob(np.array([0.1, 0.05]), PAIR, 0.3)
    assert p[0] == pytest.approx(1 - (1 - 0.024) * (1 - 0.003), abs=1e-15)
    assert p[0] == pytest.approx(0.026928, abs=1e-12)


def test_infection_prob_overflow():
    with pytest.raises(ProbabilityOverflow):
        infection_prob(np.array([2.0]), CommuteWeights.identity(1), 0.9)


def test_step_screening_hand_values():
    nxt, conf = step_screening(one(0.9, 0.1), PARAMS, CommuteWeights.identity(1), np.array([0.0]))
    np.testing.assert_allclose([nxt.s[0], nxt.h[0], nxt.c[0], nxt.r[0]], [0.873, 0.1043333333, 0.016, 0.0066666667], atol=1e-9)
    assert conf[0] == pytest.approx(0.016, abs=1e-15)
    assert nxt.total()[0] == pytest.approx(1.0, abs=1e-15)

    nxt, conf = step_screening(one(0.9, 0.1), PARAMS, CommuteWeights.identity(1), np.array([0.1]))
    assert nxt.h[0] == pytest.approx(0.0943333333, abs=1e-9)
    assert nxt.c[0] == pytest.approx(0.026, abs=1e-15)


def test_step_screening_empty_epidemic_is_fixed_point():
    state = CountyState(np.array([0.7, 0.9]), np.zeros(2), np.zeros(2), np.array([0.3, 0.1]))
    nxt, conf = step_screening(state, PARAMS, PAIR, np.array([0.2, 0.5]))
    assert np.array_equal(nxt.s, state.s) and np.array_equal(nxt.r, state.r)
    assert np.array_equal(conf, [0.0, 0.0])


def test_step_screening_rejects_large_rate():
    with pytest.raises(RateTooLarge):
        step_screening(one(0.9, 0.1), PARAMS, CommuteWeights.identity(1), np.array([0.9]))


def test_step_vaccine_examples():
    state = CountyState(np.ones(2), np.zeros(2), np.zeros(2), np.zeros(2))
    nxt, _ = step_vaccine(state, PARAMS, PAIR, np.array([0.2, 0.0]))
    np.testing.assert_allclose(nxt.s, [0.8, 1.0], atol=1e-15)
    np.testing.assert_allclose(nxt.r, [0.2, 0.0], atol=1e-15)
    with pytest.raises(RateTooLarge):
        step_vaccine(one(0.9, 0.1), PARAMS, CommuteWeights.identity(1), np.array([0.99]))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8))
def test_vaccine_with_zero_rate_matches_screening(seed, n):
    rng = np.random.default_rng(seed)
    _, w = random_weights(rng, n)
    params, state = random_params(rng), random_state(rng, n)
    a, ca = step_screening(state, params, w, np.zeros(n))
    v, cv = step_vaccine(state, params, w, np.zeros(n))
    for name in "shcr":
        assert np.array_equal(getattr(a, name), getattr(v, name))
    assert np.array_equal(ca, cv)


def test_negative_compartment_is_clamped_and_flagged():
    from netscreen.epi import _clamp
    from netscreen.errors import NegativeCompartmentWarning

    flags = []
    with pytest.warns(NegativeCompartmentWarning):
        out = _clamp("h", np.array([0.1, -1e-9]), flags)
    assert out.tolist() == [0.1, 0.0] and len(flags) == 1
    # rounding noise below the tolerance is clamped silently
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert _clamp("h", np.array([-1e-15]), flags).tolist() == [0.0]


def test_disease_free_simulation_is_constant():
    rng = np.random.default_rng(3)
    _, w = random_weights(rng, 4)
    state = CountyState(np.full(4, 0.9), np.zeros(4), np.zeros(4), np.full(4, 0.1))
    trace = simulate(state, PARAMS, w, np.full(4, 1000.0), AllocationPlan.zeros(4, 1, 10))
    assert np.all(trace.s == 0.9) and np.all(trace.h == 0.0) and np.all(trace.new_confirmed == 0.0)


def scalar_sir(s, h, c, r, alpha, beta, gamma, days):
    """Plain per-county recursion used as an independent oracle."""
    out = []
    for _ in range(days):
        p = alpha * h
        s, h, c, r = s - p * s, h + p * s - (beta + gamma) * h, c + beta * h - gamma * c, r + gamma * (h + c)
        out.append((s, h, c, r))
    return out


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_identity_network_matches_scalar_recursion(seed, n):
    rng = np.random.default_rng(seed)
    params, state = random_params(rng), random_state(rng, n)
    trace = simulate(state, params, CommuteWeights.identity(n), np.full(n, 1e4), AllocationPlan.zeros(n, 1, 20))
    for i in range(n):
        ref = scalar_sir(state.s[i], state.h[i], state.c[i], state.r[i], params.alpha, params.beta, params.gamma, 20)
        for k, (s, h, c, r) in enumerate(ref):
            assert abs(trace.s[k + 1, i] - s) < 1e-12
            assert abs(trace.h[k + 1, i] - h) < 1e-12
            assert abs(trace.c[k + 1, i] - c) < 1e-12
            assert abs(trace.r[k + 1, i] - r) < 1e-12


def test_single_county_decline_iff_alpha_below_outflow():
    for alpha, declines in ((0.2, True), (0.3, False)):
        params = DiseaseParams(alpha, 0.16, 1 / 15)
        trace = simulate(one(1.0, 1e-4), params, CommuteWeights.identity(1), np.array([1e5]), AllocationPlan.zeros(1, 1, 20))
        assert bool(np.all(np.diff(trace.h[:, 0]) < 0)) is declines


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8))
def test_conservation_and_nonnegative_counts(seed, n):
    rng = np.random.default_rng(seed)
    _, w = random_weights(rng, n)
    params, state = random_params(rng), random_state(rng, n)
    N = rng.integers(100, 10**6, n).astype(float)
    trace = simulate(state, params, w, N, random_plan(rng, N, 1, 40, params))
    total = trace.s + trace.h + trace.c + trace.r
    assert np.abs(total - state.total()).max() < 1e-12
    assert trace.new_confirmed.min() >= 0
    assert np.all(np.diff(cumulative_confirmed(trace)) >= 0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), day=st.integers(0, 9), county=st.integers(0, 5))
def test_more_screening_never_raises_hidden(seed, n, day, county):
    rng = np.random.default_rng(seed)
    county %= n
    _, w = random_weights(rng, n)
    params = random_params(rng)
    state = CountyState.from_hidden(rng.uniform(0, 0.01, n))
    N = np.full(n, 1e4)
    base = np.zeros((10, n))
    more = base.copy()
    more[day, county] = params.default_rate_cap
    t1 = simulate(state, params, w, N, AllocationPlan(1, 10, base, 1e9), hold_susceptible=True)
    t2 = simulate(state, params, w, N, AllocationPlan(1, 10, more, 1e9), hold_susceptible=True)
    assert np.all(t2.h <= t1.h + 1e-15)


def test_new_confirmed_formula():
    rng = np.random.default_rng(5)
    _, w = random_weights(rng, 3)
    N = np.array([1e3, 2e3, 5e3])
    state = CountyState.from_hidden(np.array([0.01, 0.02, 0.0]))
    plan = random_plan(rng, N, 1, 5, PARAMS)
    trace = simulate(state, PARAMS, w, N, plan)
    expected = (PARAMS.beta + plan.rates) * N * trace.h[:-1]
    np.testing.assert_allclose(trace.new_confirmed, expected, rtol=1e-15)
    vac = simulate(state, PARAMS, w, N, AllocationPlan(1, 5, plan.rates * 0.1, plan.budget, VACCINATION))
    np.testing.assert_allclose(vac.new_confirmed, PARAMS.beta * N * vac.h[:-1], rtol=1e-15)


def test_simulate_is_bit_reproducible():
    rng = np.random.default_rng(9)
    _, w = random_weights(rng, 6)
    N = rng.integers(100, 1000, 6).astype(float)
    state = CountyState.from_hidden(rng.uniform(0, 0.05, 6))
    plan = random_plan(rng, N, 1, 30, PARAMS)
    a, b = simulate(state, PARAMS, w, N, plan), simulate(state, PARAMS, w, N, plan)
    assert a.h.tobytes() == b.h.tobytes() and a.new_confirmed.tobytes() == b.new_confirmed.tobytes()


def test_cumulative_confirmed():
    from netscreen.epi import Trace

    z = np.zeros((3, 2))
    tr = Trace(1, 2, z, z, z, z, np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros((2, 2)))
    assert cumulative_confirmed(tr).tolist() == [3.0, 10.0]


def test_plan_validation():
    N = np.array([100.0, 300.0])
    with pytest.raises(InfeasiblePlan):
        AllocationPlan(1, 1, np.array([[0.2, 0.2]]), 40.0).validate(N, 0.5)
    with pytest.raises(InfeasiblePlan):
        AllocationPlan(1, 1, np.array([[0.6, 0.0]]), 100.0).validate(N, 0.5)
    with pytest.raises(InfeasiblePlan):
        AllocationPlan(1, 2, np.array([[0.6, 0.0], [0.6, 0.0]]), 1e9, VACCINATION).validate(N, 0.7)
    with pytest.raises(DimensionMismatch):
        AllocationPlan(1, 3, np.zeros((2, 2)), 0.0)


def test_initial_state_from_observations():
    obs = ObservedSeries(("A",), ("d1", "d2"), np.array([1000.0]), np.array([[0.0], [16.0]]))
    st0 = initial_state_from_observations(obs, 0.16, 1)
    assert st0.h[0] == pytest.approx(0.1, abs=1e-15) and st0.s[0] == 1.0 and st0.r[0] == 0.0
    assert initial_state_from_observations(obs, 0.16, 0).h[0] == 0.0
    with pytest.raises(ZeroBeta):
        initial_state_from_observations(obs, 0.0, 1)
    with pytest.raises(MissingRow):
        initial_state_from_observations(obs, 0.16, 5)
    with pytest.raises(MissingRow):
        obs.row_of("d9")


def test_plan_by_population():
    plan = plan_by_population(np.array([100.0, 300.0]), 40.0, 1, 3)
    np.testing.assert_allclose(plan.rates, 0.1, rtol=1e-15)
    np.testing.assert_allclose(plan.rates[0] * [100, 300], [10, 30])
    assert np.all(plan_by_population(np.array([100.0, 300.0]), 0.0, 1, 3).rates == 0)
    assert np.all(plan_by_population(np.array([100.0, 300.0]), 1e6, 1, 3, a_max=0.5).rates == 0.5)


def test_plan_by_infection_rate():
    N = np.array([100.0, 100.0])
    np.testing.assert_allclose(plan_by_infection_rate([10, 0], N, 5.0), [0.05, 0.0])
    np.testing.assert_allclose(plan_by_infection_rate([1, 1], N, 10.0), [0.05, 0.05])
    np.testing.assert_allclose(plan_by_infection_rate([0, 0], N, 10.0), [0.05, 0.05])


@settings(max_examples=60, deadline=None)
@given(
    counts=st.lists(st.floats(0, 1000), min_size=2, max_size=8),
    frac=st.floats(0.0, 0.5),
    a_max=st.floats(0.05, 0.8),
)
def test_infection_rate_plan_feasible_and_tight(counts, frac, a_max):
    n = len(counts)
    N = np.linspace(100.0, 1000.0, n)
    M = frac * N.sum()
    a = plan_by_infection_rate(counts, N, M, a_max)
    assert np.all(a >= 0) and np.all(a <= a_max + 1e-12)
    used = a @ N
    assert used <= M * (1 + 1e-9) + 1e-9
    positive = np.array(counts) > 0
    reachable = a_max * N[positive].sum() if positive.any() else a_max * N.sum()
    assert used == pytest.approx(min(M, reachable), rel=1e-9, abs=1e-9)


def test_symmetric_counties_give_identical_baselines():
    from netscreen.epi import infection_rate_policy, run

    W = CommuteWeights(np.array([[0.9, 0.1], [0.1, 0.9]]), 1.0)
    N = np.array([5000.0, 5000.0])
    state = CountyState.from_hidden(np.array([0.01, 0.01]))
    pop = simulate(state, PARAMS, W, N, plan_by_population(N, 200.0, 1, 20, PARAMS.default_rate_cap))
    inf = run(state, PARAMS, W, N, 1, 20, infection_rate_policy(N, 200.0, PARAMS.default_rate_cap, PARAMS.beta * N * state.h))
    np.testing.assert_allclose(cumulative_confirmed(pop), cumulative_confirmed(inf), rtol=1e-13)


def test_warnings_not_raised_on_normal_run():
    rng = np.random.default_rng(2)
    _, w = random_weights(rng, 5)
    N = np.full(5, 1e4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        simulate(CountyState.from_hidden(np.full(5, 0.01)), PARAMS, w, N, random_plan(rng, N, 1, 30, PARAMS))
