"""Four-state exact-majority protocol (ambassador variant, cancel to two weak opinions).

Codes: ``opinion * 2 + weak`` so X=0 (strong A), x=1 (weak A), Y=2 (strong B),
y=3 (weak B). The output is the opinion bit, 0 for A and 1 for B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .engine import (CONVERGED_CORRECT, CONVERGED_INCORRECT, HORIZON_EXHAUSTED, Configuration,
                     RunResult)
from .protocol import ProtocolDefinition, ProtocolParams, Target, integer_log
from .rng import below_shift, select_pair

A, B = 0, 1
STRONG_A, WEAK_A, STRONG_B, WEAK_B = 0, 1, 2, 3
NAMES = ("X", "x", "Y", "y")


@dataclass(frozen=True)
class FourState:
    opinion: int
    strong: bool

    @property
    def code(self) -> int:
        return self.opinion * 2 + (0 if self.strong else 1)

    @classmethod
    def from_code(cls, code: int) -> "FourState":
        return cls(code >> 1, (code & 1) == 0)

    def __str__(self) -> str:
        return NAMES[self.code]


@dataclass(frozen=True)
class Scenario:
    a0: int
    b0: int

    def __post_init__(self):
        if self.a0 < 0 or self.b0 < 0:
            raise ValueError("opinion counts must be non-negative")
        if self.a0 == self.b0:
            raise ValueError("exact majority needs a0 != b0")

    @property
    def n(self) -> int:
        return self.a0 + self.b0

    @property
    def majority(self) -> int:
        return A if self.a0 > self.b0 else B

    @classmethod
    def with_imbalance(cls, n: int, imbalance: int) -> "Scenario":
        """``a0 - b0 = imbalance`` with A the majority."""
        if imbalance <= 0 or imbalance > n or (n - imbalance) % 2:
            raise ValueError(f"imbalance {imbalance} infeasible for n={n}")
        b0 = (n - imbalance) // 2
        return cls(n - b0, b0)

    @classmethod
    def minimal(cls, n: int) -> "Scenario":
        """``a0 = floor(n/2) + 1``: margin 1 for odd n, 2 for even n."""
        a0 = n // 2 + 1
        return cls(a0, n - a0)


@njit(inline="always")
def fs_core(p, q):
    sp = (p & 1) == 0
    sq = (q & 1) == 0
    op = p >> 1
    oq = q >> 1
    if op == oq:
        return p, q
    if sp and sq:
        # opposite strong opinions cancel into weak ones
        return p | 1, q | 1
    if sp:
        # strong token converts the weak opposite and moves across
        return p | 1, p
    if sq:
        return q, q | 1
    return p, q


@njit(cache=True)
def fourstate_delta(p, q):
    return fs_core(p, q)


@njit(cache=True)
def _delta(a, b, table):
    return fs_core(a, b)


@njit(cache=True)
def _output(a, table):
    return a >> 1


def fourstate_transition(p: FourState, q: FourState) -> tuple[FourState, FourState]:
    a, b = fourstate_delta(p.code, q.code)
    return FourState.from_code(int(a)), FourState.from_code(int(b))


def fourstate_output(s: FourState) -> int:
    return s.opinion


def stable_counts(cnt) -> bool:
    return (cnt[2] + cnt[3] == 0) or (cnt[0] + cnt[1] == 0) or (cnt[0] + cnt[2] == 0)


def _stable(states: np.ndarray) -> bool:
    return stable_counts(np.bincount(states, minlength=4))


@njit(cache=True)
def _run_kernel(states, st, shift, steps, horizon, target, instrument):
    n = states.shape[0]
    cnt = np.zeros(4, np.int64)
    for k in range(n):
        cnt[states[k]] += 1
    correct = cnt[2 * target] + cnt[2 * target + 1]
    conv = steps if correct == n else -1
    diff0 = cnt[0] - cnt[2]
    violations = 0
    stable = (cnt[2] + cnt[3] == 0) or (cnt[0] + cnt[1] == 0) or (cnt[0] + cnt[2] == 0)
    while not stable and steps < horizon:
        i, j = select_pair(st, n, shift)
        a = states[i]
        b = states[j]
        a2, b2 = fs_core(a, b)
        steps += 1
        if a2 != a or b2 != b:
            states[i] = a2
            states[j] = b2
            cnt[a] -= 1
            cnt[b] -= 1
            cnt[a2] += 1
            cnt[b2] += 1
            correct = cnt[2 * target] + cnt[2 * target + 1]
            if instrument and cnt[0] - cnt[2] != diff0:
                violations += 1
            stable = (cnt[2] + cnt[3] == 0) or (cnt[0] + cnt[1] == 0) or (cnt[0] + cnt[2] == 0)
        if correct == n:
            if conv < 0:
                conv = steps
        else:
            conv = -1
    return steps, conv, stable, violations


def fast_run(config: Configuration, protocol: ProtocolDefinition, horizon: int, instrument: bool) -> RunResult:
    target = protocol.target(config.scenario).symbol
    steps, conv, stable, violations = _run_kernel(config.states, config.rng.state, below_shift(config.n),
                                                  config.steps, horizon, target, instrument)
    config.steps = int(steps)
    conv = None if conv < 0 else int(conv)
    if stable:
        outcome = CONVERGED_CORRECT if conv is not None else CONVERGED_INCORRECT
    else:
        outcome = HORIZON_EXHAUSTED
    aux = {"conservation_violations": int(violations)} if instrument else {}
    return RunResult(config.n, conv, config.steps, outcome, aux)


def default_horizon(n: int) -> int:
    return 20 * n * n * integer_log(n)


def protocol(n: int) -> ProtocolDefinition:
    params = ProtocolParams(n=n)

    def init(agent: int, scenario: Scenario) -> int:
        return STRONG_A if agent < scenario.a0 else STRONG_B

    return ProtocolDefinition(
        name="fourstate",
        params=params,
        n_states=4,
        table=np.zeros(1, dtype=np.int64),
        kernel_delta=_delta,
        kernel_output=_output,
        init=init,
        target=lambda scenario: Target(scenario.majority),
        output_labels=("A", "B"),
        encode=lambda s: s.code,
        decode=FourState.from_code,
        stable=_stable,
        fast_run=fast_run,
    )
