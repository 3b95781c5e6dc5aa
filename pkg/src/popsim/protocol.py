"""Protocol contract: parameter block, definition record, symmetry and state-count checks.

Every protocol works on dense integer state codes. A protocol ships a compiled
transition ``delta(a, b, table) -> (a', b')`` and output ``gamma(a, table)``,
where ``table`` is an int64 array holding its derived constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

import numpy as np
from numba import njit


class InvalidPopulationError(ValueError):
    pass


class InfeasibleError(RuntimeError):
    """Raised when an exhaustive computation would exceed its configured cap."""


def integer_log(n: int) -> int:
    """``ceil(log2 n)``, the single integerisation used for every ``log n``."""
    if n < 2:
        raise InvalidPopulationError(f"population must have at least 2 agents, got {n}")
    return (n - 1).bit_length()


@dataclass(frozen=True)
class LeaderConstants:
    """Per-phase multipliers of ``Ln`` for the leader protocol (simulation table defaults)."""

    k0: int = 2    # q0 wait
    k1: int = 4    # q1 wait
    k2: int = 8    # q2 wait
    k4: int = 8    # q4 Bernoulli trials
    k5: int = 20   # q5 broadcast-of-maximum wait
    k6i: int = 48  # q6 interactions per test phase
    k6j: int = 4   # q6 number of test phases
    k7s: int = 2   # q7 spreading cutoff
    k7k: int = 33  # q7 keep cutoff

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"leader constant {f.name} must be a positive integer, got {v!r}")
        if not self.k7s < self.k7k:
            raise ValueError("k7s must be smaller than k7k")
        if not self.k6i > self.k7k:
            raise ValueError("k6i must exceed k7k")

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# small enough that n=3 configurations can be enumerated exhaustively
MINI_LEADER = LeaderConstants(k0=1, k1=1, k2=1, k4=1, k5=1, k6i=3, k6j=1, k7s=1, k7k=2)


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    c: int = 10
    C: int = 200
    leader: LeaderConstants = field(default_factory=LeaderConstants)

    def __post_init__(self):
        integer_log(self.n)
        if not (isinstance(self.c, int) and isinstance(self.C, int)):
            raise ValueError("c and C must be integers")
        if not 0 < self.c < self.C:
            raise ValueError(f"need 0 < c < C, got c={self.c}, C={self.C}")

    @property
    def Ln(self) -> int:
        return integer_log(self.n)

    def with_overrides(self, **kw) -> "ProtocolParams":
        leader_kw = {k: kw.pop(k) for k in list(kw) if k in LeaderConstants.__dataclass_fields__}
        leader = replace(self.leader, **leader_kw) if leader_kw else self.leader
        return replace(self, leader=leader, **kw)

    def as_dict(self) -> dict[str, Any]:
        return {"n": self.n, "Ln": self.Ln, "c": self.c, "C": self.C, "leader": self.leader.as_dict()}


def mini_params(n: int) -> ProtocolParams:
    return ProtocolParams(n=n, c=1, C=2, leader=MINI_LEADER)


@dataclass(frozen=True)
class Target:
    """Correctness predicate over the output multiset.

    ``exactly_one=False``: every agent outputs ``symbol``.
    ``exactly_one=True``: exactly one agent outputs ``symbol``.
    """

    symbol: int
    exactly_one: bool = False

    def holds(self, outputs: np.ndarray) -> bool:
        hits = int(np.count_nonzero(outputs == self.symbol))
        return hits == 1 if self.exactly_one else hits == len(outputs)


@dataclass(frozen=True, eq=False)
class ProtocolDefinition:
    name: str
    params: ProtocolParams
    n_states: int
    table: np.ndarray
    kernel_delta: Any
    kernel_output: Any
    init: Callable[[int, Any], int]
    target: Callable[[Any], Target]
    output_labels: tuple[str, ...]
    encode: Callable[[Any], int]
    decode: Callable[[int], Any]
    stable: Callable[[np.ndarray], bool] | None = None
    fast_run: Callable | None = None
    # optional hook(a, b, a2, b2, counters) accumulating run counters on the generic path
    observe: Callable | None = None

    def delta(self, a: int, b: int) -> tuple[int, int]:
        a2, b2 = self.kernel_delta(a, b, self.table)
        return int(a2), int(b2)

    def gamma(self, a: int) -> int:
        return int(self.kernel_output(a, self.table))

    def initial_states(self, scenario: Any) -> np.ndarray:
        return np.array([self.init(i, scenario) for i in range(self.params.n)], dtype=np.int64)

    def __repr__(self) -> str:
        return f"ProtocolDefinition({self.name!r}, n={self.params.n}, states={self.n_states})"


@njit(cache=True)
def batch_delta(delta, table, a, b):
    out_a = np.empty_like(a)
    out_b = np.empty_like(b)
    for k in range(a.shape[0]):
        out_a[k], out_b[k] = delta(a[k], b[k], table)
    return out_a, out_b


@njit(cache=True)
def batch_output(gamma, table, a):
    out = np.empty_like(a)
    for k in range(a.shape[0]):
        out[k] = gamma(a[k], table)
    return out


@njit(cache=True)
def _first_asymmetry(delta, table, a, b):
    for k in range(a.shape[0]):
        x1, y1 = delta(a[k], b[k], table)
        y2, x2 = delta(b[k], a[k], table)
        if x1 != x2 or y1 != y2:
            return k
    return -1


@njit(cache=True)
def _exhaustive_asymmetry(delta, table, n_states):
    for p in range(n_states):
        for q in range(p, n_states):
            x1, y1 = delta(p, q, table)
            y2, x2 = delta(q, p, table)
            if x1 != x2 or y1 != y2:
                return p, q
    return -1, -1


@dataclass(frozen=True)
class SymmetryVerdict:
    symmetric: bool
    checked: int
    counterexample: tuple[int, int] | None = None


EXHAUSTIVE_CAP = 20_000


def check_symmetry(protocol: ProtocolDefinition, mode: str = "exhaustive", budget: int = 1_000_000,
                   seed: int = 0, cap: int = EXHAUSTIVE_CAP) -> SymmetryVerdict:
    """Check ``delta(a, b) == swap(delta(b, a))`` over all or sampled state pairs."""
    if mode == "exhaustive":
        if protocol.n_states > cap:
            raise InfeasibleError(
                f"{protocol.name}: {protocol.n_states} states exceeds exhaustive cap {cap}; use mode='sampled'")
        p, q = _exhaustive_asymmetry(protocol.kernel_delta, protocol.table, protocol.n_states)
        checked = protocol.n_states * (protocol.n_states + 1) // 2
        if p >= 0:
            return SymmetryVerdict(False, checked, (int(p), int(q)))
        return SymmetryVerdict(True, checked)
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    a = rng.integers(0, protocol.n_states, size=budget, dtype=np.int64)
    b = rng.integers(0, protocol.n_states, size=budget, dtype=np.int64)
    k = _first_asymmetry(protocol.kernel_delta, protocol.table, a, b)
    if k >= 0:
        return SymmetryVerdict(False, int(k) + 1, (int(a[k]), int(b[k])))
    return SymmetryVerdict(True, budget)


def state_count(protocol: ProtocolDefinition) -> int:
    return protocol.n_states
