"""Uniform random pairwise scheduler and run loop for any protocol.

Two paths execute a run. :func:`run` with ``fast=False`` is a plain Python loop
over :func:`step`; it works for any :class:`ProtocolDefinition` and is the
reference. ``fast=True`` hands the configuration to the protocol's compiled
kernel, which consumes the same random stream and stops on the same predicate,
so both paths return identical results for identical seeds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .protocol import InvalidPopulationError, ProtocolDefinition, batch_delta, batch_output
from .rng import Rng

log = logging.getLogger(__name__)

CONVERGED_CORRECT = "converged-correct"
CONVERGED_INCORRECT = "converged-incorrect"
HORIZON_EXHAUSTED = "horizon-exhausted"


@dataclass
class Configuration:
    n: int
    states: np.ndarray
    rng: Rng
    steps: int = 0
    scenario: Any = None
    counters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise InvalidPopulationError(f"population must have at least 2 agents, got {self.n}")
        self.states = np.ascontiguousarray(self.states, dtype=np.int64)
        if self.states.shape != (self.n,):
            raise ValueError(f"expected {self.n} states, got shape {self.states.shape}")

    @classmethod
    def initial(cls, protocol: ProtocolDefinition, scenario: Any, seed: int) -> "Configuration":
        return cls(protocol.params.n, protocol.initial_states(scenario), Rng(seed), 0, scenario)

    def copy(self) -> "Configuration":
        rng = Rng(self.rng.seed)
        rng.state = self.rng.state.copy()
        return Configuration(self.n, self.states.copy(), rng, self.steps, self.scenario, dict(self.counters))


@dataclass(frozen=True)
class InteractionRecord:
    step: int
    agents: tuple[int, int]
    before: tuple[int, int]
    after: tuple[int, int]


@dataclass
class RunResult:
    n: int
    convergence_step: int | None
    steps: int
    outcome: str
    aux: dict[str, Any] = field(default_factory=dict)

    @property
    def parallel_time(self) -> Fraction | None:
        if self.convergence_step is None:
            return None
        return parallel_time(self.convergence_step, self.n)

    @property
    def correct(self) -> bool:
        return self.outcome == CONVERGED_CORRECT


def parallel_time(steps: int, n: int) -> Fraction:
    if n < 2:
        raise InvalidPopulationError(f"population must have at least 2 agents, got {n}")
    return Fraction(2 * steps, n)


def select_pair(n: int, rng: Rng) -> tuple[int, int]:
    if n < 2:
        raise InvalidPopulationError(f"need at least 2 agents to form a pair, got {n}")
    return rng.pair(n)


def step(config: Configuration, protocol: ProtocolDefinition) -> InteractionRecord:
    i, j = select_pair(config.n, config.rng)
    a, b = int(config.states[i]), int(config.states[j])
    a2, b2 = protocol.delta(a, b)
    config.states[i] = a2
    config.states[j] = b2
    config.steps += 1
    return InteractionRecord(config.steps, (i, j), (a, b), (a2, b2))


def _present_pairs(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, counts = np.unique(states, return_counts=True)
    ia, ib = np.triu_indices(len(uniq))
    keep = (ia != ib) | (counts[ia] >= 2)
    return uniq[ia[keep]], uniq[ib[keep]]


def output_quiescent(config: Configuration, protocol: ProtocolDefinition) -> bool:
    """True iff no single interaction available now can change any agent's output."""
    a, b = _present_pairs(config.states)
    a2, b2 = batch_delta(protocol.kernel_delta, protocol.table, a, b)
    out = lambda x: batch_output(protocol.kernel_output, protocol.table, x)
    return bool(np.array_equal(out(a), out(a2)) and np.array_equal(out(b), out(b2)))


def closure_stable(protocol: ProtocolDefinition, states: np.ndarray, cap: int = 5_000) -> bool:
    """Conservative stability test.

    Closes the set of present states under pairwise interaction (ignoring
    multiplicities, so every pair is allowed) and checks that no interaction in
    the closure changes an output. True means no future interaction can change
    any output; False may be a false alarm. Gives up (False) past ``cap`` states.
    """
    known = set(int(s) for s in np.unique(states))
    order = sorted(known)
    frontier = list(order)
    while frontier:
        new = np.array(frontier, dtype=np.int64)
        allst = np.array(order, dtype=np.int64)
        a = np.repeat(new, len(allst))
        b = np.tile(allst, len(new))
        a2, b2 = batch_delta(protocol.kernel_delta, protocol.table, a, b)
        ga, gb, ga2, gb2 = (batch_output(protocol.kernel_output, protocol.table, x) for x in (a, b, a2, b2))
        if not (np.array_equal(ga, ga2) and np.array_equal(gb, gb2)):
            return False
        frontier = []
        for s in np.concatenate([a2, b2]).tolist():
            if s not in known:
                known.add(s)
                order.append(s)
                frontier.append(s)
        if len(known) > cap:
            return False
    return True


def is_stable(protocol: ProtocolDefinition, states: np.ndarray) -> bool:
    if protocol.stable is not None:
        return protocol.stable(states)
    return closure_stable(protocol, states)


def run(config: Configuration, protocol: ProtocolDefinition, horizon: int, fast: bool = False,
        instrument: bool = False) -> RunResult:
    """Run until the configuration is output-stable or ``horizon`` interactions have happened.

    ``convergence_step`` is the first interaction count from which every later
    configuration in the run satisfies the target; it is computed
    retrospectively so transient agreement does not count.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if fast:
        if protocol.fast_run is None:
            raise ValueError(f"{protocol.name} has no compiled run kernel")
        return protocol.fast_run(config, protocol, horizon, instrument)

    target = protocol.target(config.scenario)
    outputs = batch_output(protocol.kernel_output, protocol.table, config.states)
    conv = config.steps if target.holds(outputs) else None
    stable = is_stable(protocol, config.states)
    while not stable and config.steps < horizon:
        rec = step(config, protocol)
        if protocol.observe is not None:
            protocol.observe(*rec.before, *rec.after, config.counters)
        i, j = rec.agents
        outputs[i] = protocol.gamma(rec.after[0])
        outputs[j] = protocol.gamma(rec.after[1])
        if target.holds(outputs):
            if conv is None:
                conv = config.steps
        else:
            conv = None
        stable = is_stable(protocol, config.states)
    if stable:
        outcome = CONVERGED_CORRECT if conv is not None else CONVERGED_INCORRECT
    else:
        outcome = HORIZON_EXHAUSTED
    return RunResult(config.n, conv, config.steps, outcome)
