from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from popsim import leader
from popsim.engine import Configuration, run
from popsim.leader import (G_0, G_1, G_N, INITIAL, Q0, Q1, Q2, Q3, Q4, Q6, Q7, Q8, Q9, Q10, X_A, X_B, X_N,
                           LeaderAgentState as S, count_candidates, decode, encode, leader_output,
                           leader_transition, restart_count, stable_states)
from popsim.protocol import ProtocolParams, check_symmetry, mini_params

PARAMS = ProtocolParams(n=256)
MINI = mini_params(3)


def test_q0_meets_q1_a_node():
    u2, _ = leader_transition(S(Q0, (3,)), S(Q1, (2,), X_A), PARAMS)
    assert u2 == S(Q1, (0,), X_B, G_N)


def test_q4_trial_success():
    u2, _ = leader_transition(S(Q4, (0, 0), X_A, G_0), S(Q2, (0,), X_A, G_1), PARAMS)
    assert u2.family == Q4 and u2.idx == (1, 1)


def test_conflicting_messages_trigger_restart():
    u2, v2 = leader_transition(S(Q7, (1, 0), X_A, G_0), S(Q7, (2, 0), X_B, G_1), PARAMS)
    assert u2.family == Q8 and v2.family == Q8


def test_outputs():
    assert leader_output(S(Q9, (0,))) == "L"
    assert leader_output(S(Q10)) == "F"
    assert leader_output(S(Q6, (1, 3, 2), X_A, G_0)) == "F"


def test_leader_converts_followers():
    u2, v2 = leader_transition(S(Q9, (1,)), S(Q3, (0, 0), X_A, G_0), PARAMS)
    assert u2.family == Q9 and v2 == S(Q10)


def test_unmatched_pair_is_unchanged():
    assert leader_transition(S(Q10), S(Q10), PARAMS) == (S(Q10), S(Q10))


def test_candidate_and_restart_counts():
    n = 6
    params = ProtocolParams(n=n)
    states = np.array([encode(S(Q9, (0,)), params)] + [encode(S(Q10), params)] * (n - 1))
    assert count_candidates(states, params) == 0
    assert stable_states(states, params)
    proto = leader.protocol(params)
    cfg = Configuration.initial(proto, None, 0)
    assert count_candidates(cfg.states, params) == 0 and restart_count(cfg) == 0
    assert all(decode(int(c), params) == INITIAL for c in cfg.states)


def test_duel_configurations():
    params = ProtocolParams(n=4)
    q9 = lambda b: encode(S(Q9, (b,)), params)
    assert not stable_states(np.array([q9(0), q9(1), q9(1), q9(1)]), params)
    # all bits equal: no interaction changes anything, yet more than one leader remains
    assert stable_states(np.array([q9(1)] * 4), params)


@settings(max_examples=300, deadline=None)
@given(code=st.integers(0, leader.protocol(PARAMS).n_states - 1))
def test_encode_decode_roundtrip(code):
    assert encode(decode(code, PARAMS), PARAMS) == code


@settings(max_examples=500, deadline=None)
@given(a=st.integers(0, leader.protocol(MINI).n_states - 1), b=st.integers(0, leader.protocol(MINI).n_states - 1))
def test_transition_symmetric_and_closed(a, b):
    n_states = leader.protocol(MINI).n_states
    a2, b2 = leader.leader_delta(a, b, leader._table(MINI))
    b3, a3 = leader.leader_delta(b, a, leader._table(MINI))
    assert (a2, b2) == (a3, b3)
    assert 0 <= a2 < n_states and 0 <= b2 < n_states


def test_symmetry_suites():
    assert check_symmetry(leader.protocol(MINI), mode="exhaustive").symmetric
    assert check_symmetry(leader.protocol(ProtocolParams(n=1024)), mode="sampled", budget=200_000).symmetric


@pytest.mark.parametrize("params,horizon", [
    (ProtocolParams(n=16), None),
    (ProtocolParams(n=64), None),
    # the default constants are tuned for large n; tiny populations use the miniature set
    (mini_params(3), 10**7),
    (mini_params(8), 10**7),
])
def test_exactly_one_leader(params, horizon):
    proto = leader.protocol(params)
    for seed in range(10):
        cfg = Configuration.initial(proto, None, seed)
        res = run(cfg, proto, horizon or leader.default_horizon(params), fast=True, instrument=True)
        assert res.correct and res.aux["s_monotonicity_violations"] == 0
        outs = [leader.leader_output(decode(int(c), params)) for c in cfg.states]
        assert outs.count("L") == 1


def test_selection_mode_reports_vmax():
    params = ProtocolParams(n=64)
    proto = leader.protocol(params, stop="selection")
    for seed in range(5):
        cfg = Configuration.initial(proto, None, seed)
        res = run(cfg, proto, leader.default_horizon(params), fast=True)
        assert res.correct or res.outcome == "converged-incorrect"
        assert leader.selection_done(cfg.states, params)
        assert res.aux["vmax_size"] == leader.vmax_size(cfg.states, params) >= 1
