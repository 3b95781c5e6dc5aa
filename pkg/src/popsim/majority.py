"""O(log^2 n)-state exact majority with a four-state backup running alongside.

Each agent carries a vote (A, B or none), a phase/step clock, the flags
doubled/done/fail and the backup four-state substate. Phases alternate a
canceling stage (opposite votes annihilate) and a doubling stage (surviving
votes duplicate into empty agents); an agent that reaches the end of a phase
holding a vote it could not duplicate decides. Clock disagreement or a
conflicting decision sends both agents to fail, where the backup's output takes
over.

State code: ``t * 96 + vote * 32 + doubled * 16 + done * 8 + fail * 4 + backup``
with ``t = phase * tau + step``.
"""

from __future__ import annotations

import enum
import functools
import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .engine import (CONVERGED_CORRECT, CONVERGED_INCORRECT, HORIZON_EXHAUSTED, Configuration,
                     RunResult)
from .fourstate import STRONG_A, STRONG_B, FourState, Scenario, fourstate_delta
from .protocol import ProtocolDefinition, ProtocolParams, Target
from .rng import below_shift, select_pair

log = logging.getLogger(__name__)

NO_VOTE, VOTE_A, VOTE_B = 0, 1, 2
VOTE_NAMES = ("-", "A", "B")

# table layout
T_N, T_LN, T_C_SMALL, T_C_BIG, T_P, T_TAU, T_B1, T_B2, T_B3, T_B4, T_T = range(11)
T_FS = 16    # 16-entry backup transition table: (p*4+q) -> p'*4+q'
T_OFF = 32   # per-clock global part index 5*phase+part


class PhasePart(enum.IntEnum):
    BEGINNING = 0
    CANCELING = 1
    MIDDLE = 2
    DOUBLING = 3
    END = 4


@dataclass(frozen=True)
class Clock:
    phase: int
    step: int


@dataclass(frozen=True)
class MajorityAgentState:
    vote: int
    phase: int
    step: int
    doubled: bool
    done: bool
    fail: bool
    backup: FourState

    @property
    def clock(self) -> Clock:
        return Clock(self.phase, self.step)

    def __str__(self) -> str:
        flags = "".join(f for f, on in (("D", self.doubled), ("d", self.done), ("F", self.fail)) if on)
        return f"<{VOTE_NAMES[self.vote]} {self.phase}:{self.step} {flags or '.'} {self.backup}>"


@dataclass(frozen=True)
class Geometry:
    """Integer phase/step layout derived from ``(n, c, C)``."""

    P: int
    tau: int
    bounds: tuple[int, int, int, int]

    @classmethod
    def of(cls, params: ProtocolParams) -> "Geometry":
        ln, c, C = params.Ln, params.c, params.C
        tau = C * ln
        half = tau // 2
        bounds = (c * ln, half - c * ln, half + 2 * c * ln, (C - 5 * c) * ln)
        edges = (0,) + bounds + (tau,)
        if any(lo >= hi for lo, hi in zip(edges, edges[1:])):
            raise ValueError(f"c={c}, C={C} leave an empty part of the phase (boundaries {edges})")
        if C < 64 * c:
            _note_small_C(c, C)
        return cls(ln + 1, tau, bounds)


@functools.lru_cache(maxsize=None)
def _note_small_C(c: int, C: int) -> None:
    log.info("C=%d is below 64c=%d; the synchronisation analysis assumes C > 64c", C, 64 * c)


def part_of(step: int, params: ProtocolParams) -> PhasePart:
    geo = Geometry.of(params)
    if not 0 <= step < geo.tau:
        raise ValueError(f"step {step} outside [0, {geo.tau})")
    for k, b in enumerate(geo.bounds):
        if step < b:
            return PhasePart(k)
    return PhasePart.END


def global_part(clock: Clock, params: ProtocolParams) -> int:
    return 5 * clock.phase + int(part_of(clock.step, params))


def consistent(t1: Clock, t2: Clock, params: ProtocolParams) -> bool:
    return abs(global_part(t1, params) - global_part(t2, params)) <= 1


def next_clock(t: Clock, params: ProtocolParams) -> Clock:
    geo = Geometry.of(params)
    if t.phase == geo.P - 1 and t.step == geo.tau - 1:
        return t
    if t.step + 1 == geo.tau:
        return Clock(t.phase + 1, 0)
    return Clock(t.phase, t.step + 1)


def build_table(params: ProtocolParams) -> np.ndarray:
    geo = Geometry.of(params)
    T = geo.P * geo.tau
    table = np.zeros(T_OFF + T, dtype=np.int64)
    table[:T_T + 1] = (params.n, params.Ln, params.c, params.C, geo.P, geo.tau, *geo.bounds, T)
    parts = np.array([int(part_of(s, params)) for s in range(geo.tau)], dtype=np.int64)
    for p in range(4):
        for q in range(4):
            p2, q2 = fourstate_delta(p, q)
            table[T_FS + p * 4 + q] = p2 * 4 + q2
    table[T_OFF:] = (5 * np.arange(geo.P, dtype=np.int64)[:, None] + parts[None, :]).ravel()
    return table


def encode(s: MajorityAgentState, params: ProtocolParams) -> int:
    geo = Geometry.of(params)
    t = s.phase * geo.tau + s.step
    return t * 96 + s.vote * 32 + int(s.doubled) * 16 + int(s.done) * 8 + int(s.fail) * 4 + s.backup.code


def decode(code: int, params: ProtocolParams) -> MajorityAgentState:
    geo = Geometry.of(params)
    t, r = divmod(int(code), 96)
    phase, step = divmod(t, geo.tau)
    return MajorityAgentState(r >> 5, phase, step, bool(r & 16), bool(r & 8), bool(r & 4),
                              FourState.from_code(r & 3))


def initial_state(opinion: int, params: ProtocolParams) -> MajorityAgentState:
    vote = VOTE_A if opinion == 0 else VOTE_B
    return MajorityAgentState(vote, 0, 0, False, False, False, FourState(opinion, True))


@njit(inline="always")
def _bcer_core(a, b, table):
    ta = a // 96
    ra = a - ta * 96
    tb = b // 96
    rb = b - tb * 96
    va = ra >> 5
    vb = rb >> 5
    da = (ra >> 4) & 1
    db = (rb >> 4) & 1
    ea = (ra >> 3) & 1
    eb = (rb >> 3) & 1
    fa = (ra >> 2) & 1
    fb = (rb >> 2) & 1
    ga = table[T_OFF + ta]
    gb = table[T_OFF + tb]

    if fa == 1 or fb == 1:
        fa = 1
        fb = 1
    elif abs(ga - gb) > 1:
        fa = 1
        fb = 1
    elif ea == 1 and eb == 0:
        if vb == 0:
            vb = va
            eb = 1
        elif vb != va:
            fa = 1
            fb = 1
    elif eb == 1 and ea == 0:
        if va == 0:
            va = vb
            ea = 1
        elif va != vb:
            fa = 1
            fb = 1
    elif ea == 1 and eb == 1:
        if va != vb:
            fa = 1
            fb = 1
    elif ga % 5 == 1 and gb % 5 == 1 and va != 0 and vb != 0 and va != vb:
        va = 0
        vb = 0
    elif ga % 5 == 3 and gb % 5 == 3 and (va == 0) != (vb == 0):
        if va != 0:
            if da == 0:
                vb = va
                da = 1
                db = 1
        elif db == 0:
            va = vb
            da = 1
            db = 1

    # the agent at the earlier phase jumps to the last step of its phase
    pa = ga // 5
    pb = gb // 5
    tau = table[T_TAU]
    if pa < pb:
        ta = pa * tau + tau - 1
    elif pb < pa:
        tb = pb * tau + tau - 1

    # clock advance (saturating) and the step-0 boundary action; written out
    # rather than factored into a helper because that is markedly faster
    T = table[T_T]
    if ta < T - 1:
        ta += 1
    if tb < T - 1:
        tb += 1
    qa = table[T_OFF + ta] // 5
    qb = table[T_OFF + tb] // 5
    if ta == qa * tau and va != 0 and fa == 0 and ea == 0:
        if da == 0:
            ea = 1
        elif qa < table[T_P]:
            da = 0
    if tb == qb * tau and vb != 0 and fb == 0 and eb == 0:
        if db == 0:
            eb = 1
        elif qb < table[T_P]:
            db = 0

    k = table[T_FS + (ra & 3) * 4 + (rb & 3)]
    a2 = ta * 96 + va * 32 + da * 16 + ea * 8 + fa * 4 + (k >> 2)
    b2 = tb * 96 + vb * 32 + db * 16 + eb * 8 + fb * 4 + (k & 3)
    return a2, b2


@njit(cache=True)
def bcer_delta(a, b, table):
    return _bcer_core(a, b, table)


@njit(inline="always")
def _out_core(a, table):
    r = a % 96
    if (r >> 2) & 1:
        return (r & 3) >> 1
    v = r >> 5
    if v != 0:
        return v - 1
    return (r & 3) >> 1


@njit(cache=True)
def bcer_output_code(a, table):
    return _out_core(a, table)


def bcer_transition(u: MajorityAgentState, v: MajorityAgentState,
                    params: ProtocolParams) -> tuple[MajorityAgentState, MajorityAgentState]:
    table = _table(params)
    a, b = bcer_delta(encode(u, params), encode(v, params), table)
    return decode(a, params), decode(b, params)


def bcer_output(s: MajorityAgentState, params: ProtocolParams) -> int:
    return int(bcer_output_code(encode(s, params), _table(params)))


@functools.lru_cache(maxsize=32)
def _table(params: ProtocolParams) -> np.ndarray:
    return build_table(params)


# ---------------------------------------------------------------------------
# run kernel

# counter slots
C_FAIL, C_SAT, C_VA, C_VB, C_NFVA, C_NFVB, C_BKA, C_OUT, C_DONE, C_BKSA, C_BKSB = range(11)
N_COUNTERS = 11


@njit(inline="always")
def _tally(cnt, code, sign, target, table):
    t = code // 96
    r = code - t * 96
    v = r >> 5
    f = (r >> 2) & 1
    bk = r & 3
    cnt[C_FAIL] += sign * f
    cnt[C_DONE] += sign * (((r >> 3) & 1) & (1 - f))
    if t == table[T_T] - 1:
        cnt[C_SAT] += sign
    if v == 1:
        cnt[C_VA] += sign
        if f == 0:
            cnt[C_NFVA] += sign
    elif v == 2:
        cnt[C_VB] += sign
        if f == 0:
            cnt[C_NFVB] += sign
    if bk < 2:
        cnt[C_BKA] += sign
    if bk == 0:
        cnt[C_BKSA] += sign
    elif bk == 2:
        cnt[C_BKSB] += sign
    if _out_core(code, table) == target:
        cnt[C_OUT] += sign


@njit(inline="always")
def _stable(cnt, n):
    if cnt[C_FAIL] == 0 and cnt[C_SAT] == n and (cnt[C_VA] == n or cnt[C_VB] == n):
        return True
    if cnt[C_BKA] == n and cnt[C_NFVB] == 0:
        return True
    if cnt[C_BKA] == 0 and cnt[C_NFVA] == 0:
        return True
    return False


@njit(cache=True)
def stable_states(states, table):
    n = states.shape[0]
    cnt = np.zeros(N_COUNTERS, np.int64)
    for k in range(n):
        _tally(cnt, states[k], 1, -1, table)
    return _stable(cnt, n)


@njit(cache=True)
def _run_kernel(states, st, shift, steps, horizon, target, instrument, table, margin):
    n = states.shape[0]
    cnt = np.zeros(N_COUNTERS, np.int64)
    for k in range(n):
        _tally(cnt, states[k], 1, target, table)
    conv = steps if cnt[C_OUT] == n else -1
    stable = _stable(cnt, n)
    # counter contributions depend only on code % 96 apart from clock saturation
    last = table[T_T] - 1
    feat = np.zeros((96, N_COUNTERS), np.int64)
    for r in range(96):
        _tally(feat[r], r, 1, target, table)
        feat[r, C_SAT] = 0

    # instrumentation
    G = table[T_P] * 5
    hist = np.zeros(G, np.int64)
    for k in range(n):
        hist[table[T_OFF + states[k] // 96]] += 1
    gmin = 0
    while hist[gmin] == 0:
        gmin += 1
    gmax = G - 1
    while hist[gmax] == 0:
        gmax -= 1
    max_gap = gmax - gmin
    gap_steps = 0
    vote_violations = 0
    backup_violations = 0
    backup_diff = cnt[C_BKSA] - cnt[C_BKSB]
    doubling_checks = 0
    doubling_mismatches = 0
    next_check_phase = 0
    first_done = -1
    first_fail = -1

    while not stable and steps < horizon:
        i, j = select_pair(st, n, shift)
        a = states[i]
        b = states[j]
        a2, b2 = _bcer_core(a, b, table)
        states[i] = a2
        states[j] = b2
        steps += 1
        ra, rb, ra2, rb2 = a % 96, b % 96, a2 % 96, b2 % 96
        for k in range(N_COUNTERS):
            cnt[k] += feat[ra2, k] + feat[rb2, k] - feat[ra, k] - feat[rb, k]
        cnt[C_SAT] += (a2 // 96 == last) + (b2 // 96 == last) - (a // 96 == last) - (b // 96 == last)
        if cnt[C_OUT] == n:
            if conv < 0:
                conv = steps
        else:
            conv = -1
        stable = _stable(cnt, n)
        if first_done < 0 and cnt[C_DONE] > 0:
            first_done = steps
        if first_fail < 0 and cnt[C_FAIL] > 0:
            first_fail = steps
        if instrument:
            va, vb = (a % 96) >> 5, (b % 96) >> 5
            va2, vb2 = (a2 % 96) >> 5, (b2 % 96) >> 5
            dA = (va2 == 1) + (vb2 == 1) - (va == 1) - (vb == 1)
            dB = (va2 == 2) + (vb2 == 2) - (va == 2) - (vb == 2)
            if not ((dA == 0 and dB == 0) or (dA == -1 and dB == -1) or (dA == 1 and dB == 0)
                    or (dA == 0 and dB == 1)):
                vote_violations += 1
            if cnt[C_BKSA] - cnt[C_BKSB] != backup_diff:
                backup_violations += 1
            for old, new in ((a, a2), (b, b2)):
                g0 = table[T_OFF + old // 96]
                g1 = table[T_OFF + new // 96]
                if g0 != g1:
                    hist[g0] -= 1
                    hist[g1] += 1
                    if g1 > gmax:
                        gmax = g1
            while hist[gmin] == 0:
                gmin += 1
            if gmax - gmin > 1:
                gap_steps += 1
            if gmax - gmin > max_gap:
                max_gap = gmax - gmin
            # clean phase boundary: everyone normal and in the beginning part of one phase
            if gmin == gmax and gmin % 5 == 0 and gmin // 5 == next_check_phase:
                next_check_phase += 1
                if cnt[C_FAIL] == 0 and cnt[C_DONE] == 0:
                    doubling_checks += 1
                    expect = margin << (gmin // 5)
                    if abs(cnt[C_VA] - cnt[C_VB]) != expect:
                        doubling_mismatches += 1
            elif gmin // 5 >= next_check_phase:
                next_check_phase = gmin // 5 + 1
    return (steps, conv, stable, vote_violations, backup_violations, max_gap, gap_steps,
            doubling_checks, doubling_mismatches, first_done, first_fail, cnt[C_FAIL])


def fast_run(config: Configuration, protocol: ProtocolDefinition, horizon: int, instrument: bool) -> RunResult:
    sc: Scenario = config.scenario
    target = protocol.target(sc).symbol
    out = _run_kernel(config.states, config.rng.state, below_shift(config.n), config.steps, horizon,
                      target, instrument, protocol.table, abs(sc.a0 - sc.b0))
    (steps, conv, stable, vote_v, backup_v, max_gap, gap_steps, dchecks, dviol,
     first_done, first_fail, n_fail) = (int(x) for x in out)
    config.steps = steps
    conv = None if conv < 0 else conv
    if stable:
        outcome = CONVERGED_CORRECT if conv is not None else CONVERGED_INCORRECT
    else:
        outcome = HORIZON_EXHAUSTED
    aux = {"first_done_step": first_done, "first_fail_step": first_fail, "failed_agents": n_fail}
    if instrument:
        aux.update(vote_accounting_violations=vote_v, backup_conservation_violations=backup_v,
                   max_clock_gap=max_gap, clock_gap_steps=gap_steps,
                   doubling_checks=dchecks, doubling_mismatches=dviol)
    return RunResult(config.n, conv, config.steps, outcome, aux)


def default_horizon(params: ProtocolParams) -> int:
    return 4 * params.C * (params.n // 2) * params.Ln ** 2


def protocol(params: ProtocolParams) -> ProtocolDefinition:
    geo = Geometry.of(params)
    table = _table(params)

    def init(agent: int, scenario: Scenario) -> int:
        return encode(initial_state(0 if agent < scenario.a0 else 1, params), params)

    return ProtocolDefinition(
        name="bcer-majority",
        params=params,
        n_states=96 * geo.P * geo.tau,
        table=table,
        kernel_delta=bcer_delta,
        kernel_output=bcer_output_code,
        init=init,
        target=lambda scenario: Target(scenario.majority),
        output_labels=("A", "B"),
        encode=lambda s: encode(s, params),
        decode=lambda code: decode(code, params),
        stable=lambda states: bool(stable_states(states, table)),
        fast_run=fast_run,
    )


__all__ = ["PhasePart", "Clock", "MajorityAgentState", "Geometry", "part_of", "consistent", "next_clock",
           "bcer_transition", "bcer_output", "protocol", "default_horizon", "initial_state",
           "STRONG_A", "STRONG_B"]
