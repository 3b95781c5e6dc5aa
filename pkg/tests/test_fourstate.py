from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from popsim import fourstate
from popsim.engine import Configuration, run
from popsim.fourstate import (A, B, FourState, Scenario, fourstate_output, fourstate_transition)

X, x, Y, y = FourState(A, True), FourState(A, False), FourState(B, True), FourState(B, False)
ALL = [X, x, Y, y]


def test_transition_table():
    assert fourstate_transition(X, Y) == (x, y)
    assert fourstate_transition(X, y) == (x, X)
    assert fourstate_transition(y, X) == (X, x)
    assert fourstate_transition(Y, x) == (y, Y)
    assert fourstate_transition(x, x) == (x, x)
    assert fourstate_transition(X, x) == (X, x)
    assert fourstate_transition(x, y) == (x, y)


def test_output():
    assert fourstate_output(X) == A
    assert fourstate_output(y) == B
    for s in ALL:
        assert fourstate_output(s) == fourstate_output(FourState(s.opinion, not s.strong))


@pytest.mark.parametrize("p", ALL)
@pytest.mark.parametrize("q", ALL)
def test_strong_difference_conserved_and_symmetric(p, q):
    p2, q2 = fourstate_transition(p, q)
    strong = lambda *ss: sum(s.strong and s.opinion == A for s in ss) - sum(s.strong and s.opinion == B for s in ss)
    assert strong(p, q) == strong(p2, q2)
    assert fourstate_transition(q, p) == (q2, p2)


def test_scenario_validation():
    assert Scenario.minimal(7) == Scenario(4, 3)
    assert Scenario.minimal(8) == Scenario(5, 3)
    assert Scenario.with_imbalance(10, 4) == Scenario(7, 3)
    for bad in ((10, 3), (10, 0), (10, 12)):
        with pytest.raises(ValueError):
            Scenario.with_imbalance(*bad)
    with pytest.raises(ValueError):
        Scenario(3, 3)


@settings(max_examples=40, deadline=None)
@given(a0=st.integers(0, 40), b0=st.integers(0, 40), seed=st.integers(0, 2**64 - 1))
def test_random_runs_decide_the_majority(a0, b0, seed):
    if a0 == b0 or a0 + b0 < 2:
        return
    sc = Scenario(a0, b0)
    proto = fourstate.protocol(sc.n)
    cfg = Configuration.initial(proto, sc, seed)
    res = run(cfg, proto, fourstate.default_horizon(sc.n), fast=True, instrument=True)
    assert res.correct and res.aux["conservation_violations"] == 0
    assert np.all(cfg.states >> 1 == sc.majority)
