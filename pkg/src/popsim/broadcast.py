"""Asynchronous push-pull broadcast: whenever an informed and an uninformed
agent interact, both end up informed.

Expressed as a two-state protocol (0 = uninformed, 1 = informed) so it runs
through the same engine as the other protocols.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .engine import (CONVERGED_CORRECT, CONVERGED_INCORRECT, HORIZON_EXHAUSTED, Configuration,
                     RunResult, run)
from .protocol import InvalidPopulationError, ProtocolDefinition, ProtocolParams, Target, integer_log
from .rng import below_shift, select_pair

UNINFORMED, INFORMED = 0, 1


@dataclass(frozen=True)
class Source:
    """Scenario for a broadcast: which agent holds the message initially."""

    agent: int = 0


@dataclass
class BroadcastRun:
    n: int
    informed: np.ndarray
    steps_to_completion: int

    @property
    def periods_to_completion(self) -> Fraction:
        return Fraction(self.steps_to_completion, self.n)


@njit(cache=True)
def pushpull_delta(a, b, table):
    m = a | b
    return m, m


@njit(cache=True)
def pushpull_output(a, table):
    return a


def _stable(states: np.ndarray) -> bool:
    k = int(states.sum())
    return k == 0 or k == len(states)


@njit(cache=True)
def _run_kernel(states, st, shift, steps, horizon):
    n = states.shape[0]
    informed = 0
    for k in range(n):
        informed += states[k]
    conv = steps if informed == n else -1
    while informed != n and informed != 0 and steps < horizon:
        i, j = select_pair(st, n, shift)
        steps += 1
        if states[i] != states[j]:
            states[i] = 1
            states[j] = 1
            informed += 1
    if informed == n and conv < 0:
        conv = steps
    return steps, conv, informed


def fast_run(config: Configuration, protocol: ProtocolDefinition, horizon: int, instrument: bool) -> RunResult:
    steps, conv, informed = _run_kernel(config.states, config.rng.state, below_shift(config.n),
                                        config.steps, horizon)
    config.steps = int(steps)
    if informed == config.n:
        outcome = CONVERGED_CORRECT
    elif informed == 0:
        outcome = CONVERGED_INCORRECT
    else:
        outcome = HORIZON_EXHAUSTED
    conv = None if conv < 0 else int(conv)
    return RunResult(config.n, conv, config.steps, outcome,
                     {"periods": float(Fraction(config.steps, config.n))})


def default_horizon(n: int) -> int:
    return 64 * n * integer_log(n)


def protocol(n: int) -> ProtocolDefinition:
    def init(agent: int, scenario: Source) -> int:
        if not 0 <= scenario.agent < n:
            raise ValueError(f"source agent {scenario.agent} outside population of {n}")
        return INFORMED if agent == scenario.agent else UNINFORMED

    return ProtocolDefinition(
        name="pushpull",
        params=ProtocolParams(n=n),
        n_states=2,
        table=np.zeros(1, dtype=np.int64),
        kernel_delta=pushpull_delta,
        kernel_output=pushpull_output,
        init=init,
        target=lambda scenario: Target(INFORMED),
        output_labels=("uninformed", "informed"),
        encode=int,
        decode=int,
        stable=_stable,
        fast_run=fast_run,
    )


def run_pushpull(n: int, seed: int, fast: bool = True) -> BroadcastRun:
    """Spread one message from agent 0 until everybody has it."""
    if n < 2:
        raise InvalidPopulationError(f"population must have at least 2 agents, got {n}")
    proto = protocol(n)
    config = Configuration.initial(proto, Source(0), seed)
    # completion is certain; the horizon only guards against a broken generator
    result = run(config, proto, horizon=1 << 62, fast=fast)
    return BroadcastRun(n, config.states.astype(bool), result.steps)
