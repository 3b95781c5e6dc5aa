from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from popsim import fourstate, leader, majority
from popsim.fourstate import Scenario
from popsim.oracle import EVENTS, explore, mc_probability, wilson_interval
from popsim.protocol import InfeasibleError, InvalidPopulationError, ProtocolDefinition, ProtocolParams, mini_params
from popsim.registry import mini_majority_params


def test_fourstate_n3():
    rep = explore(fourstate.protocol(3), Scenario(2, 1))
    assert rep.ok and rep.classes <= 20
    assert rep.stable_outputs == {("A", "A", "A")}
    # the absorbing all-A class {X, x, x} is reachable and stable
    assert rep.correct_stable >= 1


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_fourstate_every_imbalance(n):
    proto = fourstate.protocol(n)
    for a in range(n + 1):
        if 2 * a == n:
            continue
        rep = explore(proto, Scenario(a, n - a))
        winner = "A" if 2 * a > n else "B"
        assert rep.ok and rep.stable_outputs == {(winner,) * n}


def _relabelled(proto: ProtocolDefinition, perm: list[int]) -> ProtocolDefinition:
    inv = {v: k for k, v in enumerate(perm)}

    def delta(a, b, table):
        a2, b2 = proto.delta(perm[a], perm[b])
        return inv[a2], inv[b2]

    return ProtocolDefinition(proto.name, proto.params, proto.n_states, proto.table, delta,
                              lambda a, table: proto.gamma(perm[a]),
                              lambda i, sc: inv[proto.init(i, sc)], proto.target, proto.output_labels,
                              int, int)


def test_result_does_not_depend_on_state_labels():
    proto = fourstate.protocol(5)
    a = explore(proto, Scenario(3, 2))
    b = explore(_relabelled(proto, [3, 1, 2, 0]), Scenario(3, 2))
    assert (a.classes, a.edges, a.stable, a.correct_stable, a.stable_outputs) == \
        (b.classes, b.edges, b.stable, b.correct_stable, b.stable_outputs)
    assert explore(proto, Scenario(3, 2)) == a


def test_leader_miniature_n3():
    rep = explore(leader.protocol(mini_params(3)))
    assert rep.ok and rep.stable_outputs == {("L", "F", "F")}


def test_majority_miniature_n3():
    rep = explore(majority.protocol(mini_majority_params(3)), Scenario(2, 1))
    assert rep.ok and rep.stable_outputs == {("A", "A", "A")}


def test_cap_and_population_errors():
    with pytest.raises(InfeasibleError, match="upper bound"):
        explore(leader.protocol(mini_params(3)), cap=1000)
    with pytest.raises(InvalidPopulationError):
        explore(fourstate.protocol(1), Scenario(1, 0))


def test_mc_trivial_events():
    proto = fourstate.protocol(7)
    assert mc_probability(proto, "always", 20, 1).p == 1.0
    assert mc_probability(proto, "never", 20, 1).p == 0.0
    est = mc_probability(proto, "converged-correct", 20, 1)
    assert est.hits == 20 and est.low > 0.8
    with pytest.raises(ValueError):
        mc_probability(proto, "sometimes", 10, 1)
    with pytest.raises(ValueError):
        mc_probability(proto, "unique-candidate", 10, 1)


def test_unique_candidate_has_constant_probability():
    est = mc_probability(leader.protocol(ProtocolParams(n=256)), "unique-candidate", 200, 11)
    assert est.p >= 0.1


def test_wilson_known_value():
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)


@given(trials=st.integers(1, 5000), frac=st.floats(0, 1))
def test_wilson_contains_estimate(trials, frac):
    hits = round(frac * trials)
    lo, hi = wilson_interval(hits, trials)
    assert 0 <= lo <= hits / trials <= hi <= 1


def test_event_names():
    assert {"unique-candidate", "always", "never", "converged-correct"} <= set(EVENTS)
