"""Name -> protocol construction, default scenario and default horizon."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

from . import broadcast, fourstate, leader, majority
from .fourstate import Scenario
from .protocol import ProtocolDefinition, ProtocolParams, mini_params

MINIMAL = "minimal"


def majority_scenario(n: int, imbalance: Any = MINIMAL) -> Scenario:
    """Initial opinions with A the majority.

    ``imbalance`` is ``"minimal"`` (a0 = floor(n/2) + 1), an absolute integer
    ``a0 - b0``, or a fraction ``0 < eps < 1`` of ``n`` rounded up to the
    nearest feasible margin (same parity as ``n``).
    """
    if imbalance is None or imbalance == MINIMAL:
        return Scenario.minimal(n)
    if isinstance(imbalance, bool):
        raise ValueError(f"invalid imbalance {imbalance!r}")
    if isinstance(imbalance, float) and not imbalance.is_integer():
        if not 0 < imbalance < 1:
            raise ValueError(f"fractional imbalance must lie in (0, 1), got {imbalance}")
        margin = max(1, math.ceil(imbalance * n))
        if (n - margin) % 2:
            margin += 1
        return Scenario.with_imbalance(n, margin)
    return Scenario.with_imbalance(n, int(imbalance))


@dataclass(frozen=True)
class ProtocolEntry:
    name: str
    build: Callable[[ProtocolParams], ProtocolDefinition]
    scenario: Callable[[int, Any], Any]
    horizon: Callable[[ProtocolParams], int]
    is_majority: bool
    mini: Callable[[int], ProtocolParams] = ProtocolParams


# c=1, C=2 would leave a part of each majority phase empty; C=15 is the
# smallest C for c=1 with four non-empty parts
def mini_majority_params(n: int) -> ProtocolParams:
    return ProtocolParams(n=n, c=1, C=15)


PROTOCOLS: dict[str, ProtocolEntry] = {
    "fourstate": ProtocolEntry("fourstate", lambda p: fourstate.protocol(p.n), majority_scenario,
                               lambda p: fourstate.default_horizon(p.n), True),
    "bcer-majority": ProtocolEntry("bcer-majority", majority.protocol, majority_scenario,
                                   majority.default_horizon, True, mini_majority_params),
    "bcer-leader": ProtocolEntry("bcer-leader", leader.protocol, lambda n, imb: None,
                                 leader.default_horizon, False, mini_params),
    "pushpull": ProtocolEntry("pushpull", lambda p: broadcast.protocol(p.n),
                              lambda n, imb: broadcast.Source(0),
                              lambda p: broadcast.default_horizon(p.n), False),
}


def get(name: str) -> ProtocolEntry:
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; choose from {sorted(PROTOCOLS)}") from None
