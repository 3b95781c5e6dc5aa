"""Brute-force checks on tiny populations and Monte Carlo event estimates.

On the complete graph agents are exchangeable, so a configuration is fully
described by the multiset of its states (a *class*). :func:`explore` runs a
breadth-first search over classes reachable by any sequence of interactions,
then classifies them:

* a class is *output-stable* if every class reachable from it has the same
  output multiset;
* a *violation* is a reachable class from which no output-stable class with a
  correct output can be reached. For a protocol that converges with
  probability 1 there are none.
"""

from __future__ import annotations

import math
from array import array
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import leader
from .engine import CONVERGED_CORRECT, Configuration, RunResult, run
from .protocol import InfeasibleError, InvalidPopulationError, ProtocolDefinition
from .rng import derive_seed

DEFAULT_CAP = 10_000_000
Z95 = 1.959963984540054

State = tuple[int, ...]


@dataclass
class ReachabilityReport:
    protocol: str
    n: int
    classes: int
    edges: int
    stable: int
    correct_stable: int
    stable_outputs: set[tuple[str, ...]]
    violations: list[State]
    witnesses: dict[State, list[State]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        outs = sorted("{" + ", ".join(o) + "}" for o in self.stable_outputs)
        return (f"{self.protocol} n={self.n}: {self.classes} classes, {self.edges} edges, "
                f"{self.stable} output-stable ({self.correct_stable} correct), "
                f"{len(self.violations)} without a path to a correct stable class; "
                f"stable output multisets: {', '.join(outs) or 'none'}")


def class_bound(n_states: int, n: int) -> int:
    """Number of multisets of size ``n`` over ``n_states`` states."""
    return math.comb(n_states + n - 1, n)


def explore(protocol: ProtocolDefinition, scenario: Any = None, cap: int = DEFAULT_CAP,
            max_witnesses: int = 5) -> ReachabilityReport:
    n = protocol.params.n
    if n < 2:
        raise InvalidPopulationError("the model needs at least 2 agents")
    labels = protocol.output_labels
    target = protocol.target(scenario)
    init: State = tuple(sorted(int(s) for s in protocol.initial_states(scenario)))

    delta_cache: dict[tuple[int, int], tuple[int, int]] = {}
    out_cache: dict[int, int] = {}

    def delta(a: int, b: int) -> tuple[int, int]:
        r = delta_cache.get((a, b))
        if r is None:
            r = delta_cache[(a, b)] = protocol.delta(a, b)
        return r

    def gamma(a: int) -> int:
        r = out_cache.get(a)
        if r is None:
            r = out_cache[a] = protocol.gamma(a)
        return r

    index: dict[State, int] = {init: 0}
    classes: list[State] = [init]
    parent = array("q", [-1])
    # successor lists in compressed form: succ[start[c]:start[c + 1]]
    succ = array("q")
    start = array("q", [0])
    queue = deque([0])
    while queue:
        cid = queue.popleft()
        cfg = classes[cid]
        nxt: set[int] = set()
        distinct = sorted(set(cfg))
        for x, a in enumerate(distinct):
            for b in distinct[x:]:
                if a == b and cfg.count(a) < 2:
                    continue
                a2, b2 = delta(a, b)
                if (a2, b2) == (a, b) or (a2, b2) == (b, a):
                    new = cfg
                else:
                    rest = list(cfg)
                    rest.remove(a)
                    rest.remove(b)
                    new = tuple(sorted(rest + [a2, b2]))
                nid = index.get(new)
                if nid is None:
                    if len(classes) >= cap:
                        raise InfeasibleError(
                            f"{protocol.name} n={n}: more than {cap} reachable classes "
                            f"(upper bound {class_bound(protocol.n_states, n)})")
                    nid = index[new] = len(classes)
                    classes.append(new)
                    parent.append(cid)
                    queue.append(nid)
                nxt.add(nid)
        succ.extend(sorted(nxt))
        start.append(len(succ))
    del index

    m = len(classes)
    src = np.repeat(np.arange(m, dtype=np.int64), np.diff(np.frombuffer(start, dtype=np.int64)))
    dst = np.frombuffer(succ, dtype=np.int64)
    out_ids: dict[tuple[int, ...], int] = {}
    out_of = np.empty(m, dtype=np.int64)
    out_list: list[tuple[int, ...]] = []
    for c, cfg in enumerate(classes):
        key = tuple(sorted(gamma(s) for s in cfg))
        oid = out_ids.get(key)
        if oid is None:
            oid = out_ids[key] = len(out_list)
            out_list.append(key)
        out_of[c] = oid
    # reverse adjacency (predecessors), compressed by target
    order = np.argsort(dst, kind="stable")
    pred = src[order]
    pstart = np.searchsorted(dst[order], np.arange(m + 1))

    def closure(seed: np.ndarray) -> np.ndarray:
        """All classes that can reach a class in ``seed``."""
        mark = seed.copy()
        frontier = np.flatnonzero(mark)
        while frontier.size:
            lo, hi = pstart[frontier], pstart[frontier + 1]
            lens = hi - lo
            # gather pred[lo[k]:hi[k]] for every k without a Python loop
            flat = np.arange(lens.sum()) - np.repeat(np.cumsum(lens) - lens, lens) + np.repeat(lo, lens)
            cand = np.unique(pred[flat])
            cand = cand[~mark[cand]]
            mark[cand] = True
            frontier = cand
        return mark

    # unstable = can reach a class whose output multiset differs from its own
    unstable = closure(np.bincount(src[out_of[src] != out_of[dst]], minlength=m) > 0)
    correct_out = np.array([target.holds(np.array(o)) for o in out_list], dtype=bool)
    correct_stable = ~unstable & correct_out[out_of]
    n_correct_stable = int(correct_stable.sum())
    good = closure(correct_stable)

    violations = [classes[c] for c in range(m) if not good[c]]
    witnesses = {}
    for c in [c for c in range(m) if not good[c]][:max_witnesses]:
        path = []
        while c >= 0:
            path.append(classes[c])
            c = parent[c]
        witnesses[path[0]] = path[::-1]
    stable_outputs = {tuple(labels[o] for o in out_list[k]) for k in np.unique(out_of[~unstable])}
    return ReachabilityReport(protocol.name, n, m, len(succ), int((~unstable).sum()),
                              n_correct_stable, stable_outputs, violations, witnesses)


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True)
class Estimate:
    event: str
    trials: int
    hits: int
    low: float
    high: float

    @property
    def p(self) -> float:
        return self.hits / self.trials


def wilson_interval(hits: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("need at least one trial")
    p = hits / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    # the endpoints are exactly 0 and 1 when all trials fail or succeed
    low = 0.0 if hits == 0 else max(0.0, centre - half)
    high = 1.0 if hits == trials else min(1.0, centre + half)
    return low, high


@dataclass(frozen=True)
class Event:
    """A predicate over one seeded run. ``prepare`` may swap in a protocol variant."""

    predicate: Callable[[RunResult, Configuration], bool]
    prepare: Callable[[ProtocolDefinition], ProtocolDefinition] = lambda p: p


def _selection_variant(p: ProtocolDefinition) -> ProtocolDefinition:
    if p.name != "bcer-leader":
        raise ValueError("event 'unique-candidate' applies to the leader protocol only")
    return leader.protocol(p.params, stop="selection")


EVENTS: dict[str, Event] = {
    "unique-candidate": Event(lambda r, c: r.aux.get("vmax_size") == 1, _selection_variant),
    "converged-correct": Event(lambda r, c: r.outcome == CONVERGED_CORRECT),
    "restart-free": Event(lambda r, c: r.aux.get("restarts", 0) == 0),
    "always": Event(lambda r, c: True),
    "never": Event(lambda r, c: False),
}


def mc_probability(protocol: ProtocolDefinition, event: str, trials: int, seed: int,
                   scenario: Any = None, horizon: int | None = None) -> Estimate:
    """Fraction of ``trials`` seeded runs in which ``event`` holds, with a 95% Wilson interval."""
    if event not in EVENTS:
        raise ValueError(f"unknown event {event!r}; choose from {sorted(EVENTS)}")
    if trials < 1:
        raise ValueError("need at least one trial")
    from .registry import get
    ev = EVENTS[event]
    proto = ev.prepare(protocol)
    entry = get(protocol.name)
    if scenario is None:
        scenario = entry.scenario(proto.params.n, None)
    if horizon is None:
        horizon = entry.horizon(proto.params)
    hits = 0
    for t in range(trials):
        config = Configuration.initial(proto, scenario, derive_seed(seed, proto.params.n, t))
        result = run(config, proto, horizon, fast=proto.fast_run is not None)
        hits += bool(ev.predicate(result, config))
    low, high = wilson_interval(hits, trials)
    return Estimate(event, trials, hits, low, high)
