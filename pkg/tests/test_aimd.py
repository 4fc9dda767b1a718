import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aimdalloc import (AgentState, AimdParams, CapacitySignals, ConfigError, CostFunction,
                       agent_step, detect_capacity_events, gamma_from_delta, response_probability,
                       sample_paper_cost, update_average)
from aimdalloc.aimd import LAMBDA_MIN


class FixedDraw:
    """Stand-in random stream whose uniform draws are all ``u``."""

    def __init__(self, u):
        self.u = u
        self.calls = 0

    def random(self):
        self.calls += 1
        return self.u


RESPOND, IGNORE = FixedDraw(0.0), FixedDraw(1.0 - 1e-16)

CAMERA_ALPHA = (0.025, 0.002, 0.0225)
CAMERA_BETA = (0.70, 0.85, 0.75)


def camera_params(**kw):
    return AimdParams(alpha=kw.get("alpha", CAMERA_ALPHA), beta=kw.get("beta", CAMERA_BETA),
                      delta=[1 / 90] * 3)


def test_gamma_from_delta():
    np.testing.assert_array_equal(gamma_from_delta([1 / 90] * 3), [1 / 90] * 3)
    g = gamma_from_delta([0.5])
    assert g[0] == 0.5 and 0 < g[0] <= 0.5
    with pytest.raises(ConfigError):
        gamma_from_delta([0.0])


@pytest.mark.parametrize("field,value", [("alpha", [0.0]), ("beta", [1.0]), ("beta", [-0.1]),
                                         ("gamma_norm", [0.2]), ("gamma_soft", [1.5]),
                                         ("gamma_soft", [0.0])])
def test_params_invariants(field, value):
    kw = dict(alpha=[0.1], beta=[0.5], delta=[0.1])
    kw[field] = value
    with pytest.raises(ConfigError) as info:
        AimdParams(**kw)
    assert any(field in e for e in info.value.errors)


def test_params_defaults_and_roundtrip():
    p = AimdParams(alpha=[0.1, 0.2], beta=[0.5, 0.0], delta=[0.1, 0.05])
    np.testing.assert_array_equal(p.gamma_norm, p.delta)
    np.testing.assert_array_equal(p.gamma_soft, [1.0, 1.0])
    assert AimdParams.from_dict(p.to_dict()) == p
    assert p != AimdParams(alpha=[0.1, 0.2], beta=[0.5, 0.1], delta=[0.1, 0.05])


def test_response_probability_quadratic(quad):
    lam, clamps = response_probability(quad(10), [0.5], [1 / 90])
    assert lam[0] == pytest.approx(2 / 9, rel=1e-14)
    assert clamps == 0


def test_response_probability_zero_guard(quad):
    lam, clamps = response_probability(quad(10), [0.0], [1 / 90])
    assert lam[0] == 0.0 and clamps == 0


def test_response_probability_clamps_and_counts(quad):
    lam, clamps = response_probability(quad(1e6), [0.5], [1 / 90])
    assert lam[0] == 1 - LAMBDA_MIN and clamps == 1


def test_agent_step_additive_increase():
    f = CostFunction.from_terms([(1.0, [2, 0, 0]), (1.0, [0, 2, 0]), (1.0, [0, 0, 2])])
    out = agent_step(AgentState.initial(3), CapacitySignals.zeros(3), f, camera_params(), IGNORE)
    np.testing.assert_array_equal(out.x, CAMERA_ALPHA)
    assert out.k == 1


def test_agent_step_multiplicative_decrease_on_response():
    f = CostFunction.from_terms([(10.0, [2, 0, 0]), (1.0, [0, 2, 0]), (1.0, [0, 0, 2])])
    state = AgentState(np.array([1.0, 0.5, 0.5]), np.array([0.5, 0.5, 0.5]), 10)
    out = agent_step(state, CapacitySignals([1, 0, 0]), f, camera_params(), RESPOND)
    assert out.x[0] == 0.70
    np.testing.assert_array_equal(out.x[1:], [0.5 + 0.002, 0.5 + 0.0225])


def test_agent_step_no_response_keeps_demand():
    f = CostFunction.from_terms([(10.0, [2, 0, 0]), (1.0, [0, 2, 0]), (1.0, [0, 0, 2])])
    state = AgentState(np.array([1.0, 0.5, 0.5]), np.array([0.5, 0.5, 0.5]), 10)
    out = agent_step(state, CapacitySignals([1, 0, 0]), f, camera_params(), IGNORE)
    assert out.x[0] == 1.0


def test_agent_step_one_draw_per_signalled_resource():
    f = CostFunction.from_terms([(10.0, [2, 0, 0]), (1.0, [0, 2, 0]), (1.0, [0, 0, 2])])
    state = AgentState(np.ones(3), np.full(3, 0.5), 10)
    draws = FixedDraw(0.5)
    agent_step(state, CapacitySignals([1, 0, 1]), f, camera_params(), draws)
    assert draws.calls == 2


def test_agent_step_beta_zero_drops_to_zero(quad):
    p = AimdParams(alpha=[0.1], beta=[0.0], delta=[1 / 90])
    out = agent_step(AgentState(np.array([0.8]), np.array([0.4]), 5), CapacitySignals([1]), quad(10), p, RESPOND)
    assert out.x[0] == 0.0 and out.xbar[0] > 0


def test_agent_step_counts_only_used_clamps(quad):
    f = CostFunction.from_terms([(1e6, [2, 0]), (1e6, [0, 2])])
    p = AimdParams(alpha=[0.1, 0.1], beta=[0.5, 0.5], delta=[1 / 90] * 2)
    state = AgentState(np.ones(2), np.full(2, 0.5), 3)
    assert agent_step(state, CapacitySignals([1, 0]), f, p, IGNORE).clamps == 1
    assert agent_step(state, CapacitySignals([0, 0]), f, p, IGNORE).clamps == 0


def test_agent_step_deterministic(rng):
    f = sample_paper_cost(rng)
    state = AgentState(np.full(3, 0.3), np.full(3, 0.2), 7)
    p = camera_params()
    a = agent_step(state, CapacitySignals([1, 1, 1]), f, p, np.random.default_rng(5))
    b = agent_step(state, CapacitySignals([1, 1, 1]), f, p, np.random.default_rng(5))
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.xbar, b.xbar)


def test_update_average_examples():
    np.testing.assert_array_equal(update_average([0.0], [0.025], 0), [0.0125])
    xbar = np.array([0.7])
    for k in range(50):
        xbar = update_average(xbar, [0.7], k)
    assert xbar[0] == pytest.approx(0.7, abs=1e-15)


def test_update_average_matches_batch_mean(rng):
    seq = rng.random((201, 3))
    seq[0] = 0.0
    xbar = seq[0].copy()
    for k in range(200):
        xbar = update_average(xbar, seq[k + 1], k)
    np.testing.assert_allclose(xbar, seq.mean(axis=0), rtol=0, atol=1e-12)


def test_detect_capacity_events():
    np.testing.assert_array_equal(detect_capacity_events([33, 19, 26], [32, 20, 25]).s, [1, 0, 1])
    assert detect_capacity_events([32.0], [32.0]).s[0] == 0
    assert detect_capacity_events([29.0], [32.0], [0.9]).s[0] == 1
    assert CapacitySignals([1, 0, 1]).bits == 2


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 120),
       bits=st.lists(st.integers(0, 1), min_size=120, max_size=120))
def test_agent_step_properties(seed, steps, bits):
    gen = np.random.default_rng(seed)
    f = sample_paper_cost(gen)
    p = camera_params()
    state = AgentState.initial(3)
    peak = np.zeros(3)
    for k in range(steps):
        s = np.array([bits[(k + j) % 120] for j in range(3)], dtype=np.uint8)
        nxt = agent_step(state, CapacitySignals(s), f, p, gen)
        assert np.all(nxt.x >= 0) and np.all(nxt.xbar >= 0)
        # a signalled resource never grows
        assert np.all(nxt.x[s == 1] <= state.x[s == 1])
        assert np.all((nxt.x[s == 1] == state.x[s == 1]) | (nxt.x[s == 1] == p.beta[s == 1] * state.x[s == 1]))
        peak = np.maximum(peak, nxt.x)
        assert np.all(nxt.xbar <= peak * (1 + 1e-12))
        state = nxt
