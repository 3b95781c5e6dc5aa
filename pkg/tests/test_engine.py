from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from popsim import broadcast, fourstate, leader, majority
from popsim.engine import (CONVERGED_CORRECT, HORIZON_EXHAUSTED, Configuration, output_quiescent,
                           parallel_time, run, step)
from popsim.fourstate import STRONG_A, STRONG_B, WEAK_A, WEAK_B, Scenario
from popsim.leader import Q9, Q10, LeaderAgentState
from popsim.protocol import InvalidPopulationError, ProtocolParams, mini_params
from popsim.registry import majority_scenario, mini_majority_params
from popsim.rng import Rng


def config_of(proto, states, scenario, seed=0):
    return Configuration(len(states), np.array(states), Rng(seed), 0, scenario)


def test_parallel_time_examples():
    assert parallel_time(0, 10) == 0
    assert parallel_time(6, 4) == 3
    assert parallel_time(500_000, 1000) == 1000
    assert isinstance(parallel_time(1, 3), Fraction)
    with pytest.raises(InvalidPopulationError):
        parallel_time(1, 1)


def test_step_cancels_strong_opinions_and_touches_only_the_pair():
    proto = fourstate.protocol(2)
    cfg = config_of(proto, [STRONG_A, STRONG_B], Scenario(1, 2))
    rec = step(cfg, proto)
    assert sorted(rec.after) == [WEAK_A, WEAK_B]
    assert cfg.steps == 1

    proto = fourstate.protocol(6)
    states = [STRONG_A, WEAK_A, STRONG_B, WEAK_B, STRONG_A, WEAK_A]
    cfg = config_of(proto, states, Scenario(4, 2), seed=9)
    for _ in range(50):
        before = cfg.states.copy()
        rec = step(cfg, proto)
        untouched = np.ones(6, bool)
        untouched[list(rec.agents)] = False
        assert np.array_equal(before[untouched], cfg.states[untouched])
        assert (cfg.states[rec.agents[0]], cfg.states[rec.agents[1]]) == rec.after


def test_identity_transition_only_advances_steps():
    proto = fourstate.protocol(2)
    cfg = config_of(proto, [WEAK_A, WEAK_A], Scenario(2, 0))
    step(cfg, proto)
    assert list(cfg.states) == [WEAK_A, WEAK_A] and cfg.steps == 1


def test_output_quiescent():
    proto = fourstate.protocol(3)
    assert output_quiescent(config_of(proto, [STRONG_A, WEAK_A, WEAK_A], Scenario(2, 1)), proto)
    assert not output_quiescent(config_of(proto, [STRONG_A, STRONG_B, WEAK_A], Scenario(2, 1)), proto)

    params = mini_params(4)
    lp = leader.protocol(params)
    codes = [leader.encode(LeaderAgentState(Q9, (0,)), params)] + \
        [leader.encode(LeaderAgentState(Q10), params)] * 3
    assert output_quiescent(config_of(lp, codes, None), lp)


def test_run_already_converged():
    proto = fourstate.protocol(2)
    res = run(config_of(proto, [STRONG_A, WEAK_A], Scenario(2, 0)), proto, horizon=100)
    assert res.outcome == CONVERGED_CORRECT
    assert res.convergence_step == 0 and res.parallel_time == 0


def test_run_single_conversion():
    proto = fourstate.protocol(2)
    res = run(config_of(proto, [STRONG_A, WEAK_B], Scenario(2, 0)), proto, horizon=100)
    assert res.outcome == CONVERGED_CORRECT and res.convergence_step == 1


def test_horizon_exhaustion_is_an_outcome():
    proto = majority.protocol(ProtocolParams(n=64))
    cfg = Configuration.initial(proto, majority_scenario(64), 1)
    res = run(cfg, proto, horizon=10)
    assert res.outcome == HORIZON_EXHAUSTED and res.steps == 10
    with pytest.raises(ValueError):
        run(cfg, proto, horizon=0)


@pytest.mark.parametrize("fast", [False, True])
def test_fourstate_n5_always_correct(fast):
    proto = fourstate.protocol(5)
    for seed in range(100):
        res = run(Configuration.initial(proto, Scenario(3, 2), seed), proto, 10**6, fast=fast)
        assert res.outcome == CONVERGED_CORRECT


CASES = [
    (lambda: fourstate.protocol(9), Scenario(5, 4), 10**6),
    (lambda: majority.protocol(mini_majority_params(6)), majority_scenario(6), 10**6),
    (lambda: majority.protocol(ProtocolParams(n=16)), majority_scenario(16), 10**7),
    (lambda: leader.protocol(mini_params(5)), None, 10**6),
    (lambda: leader.protocol(ProtocolParams(n=8)), None, 10**7),
    (lambda: broadcast.protocol(20), broadcast.Source(3), 10**5),
]


@pytest.mark.parametrize("make,scenario,horizon", CASES)
def test_reference_and_compiled_paths_agree(make, scenario, horizon):
    proto = make()
    for seed in range(3):
        a = Configuration.initial(proto, scenario, seed)
        b = a.copy()
        ra = run(a, proto, horizon, fast=False)
        rb = run(b, proto, horizon, fast=True)
        assert (ra.outcome, ra.convergence_step, ra.steps) == (rb.outcome, rb.convergence_step, rb.steps)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.rng.state, b.rng.state)
        assert a.counters.get("resets", 0) == b.counters.get("resets", 0)
