"""O(log^2 n)-state leader election by interaction counting.

Agents pass through the families q0..q10:

* q0/q1 split the population into A and B nodes, q1 also picks the coin bit G;
* q2 waits, q4 runs Bernoulli trials (a meeting with an ``<*, A, 1>`` node is a
  success) accumulating a score ``s``; B nodes add the trial count to theirs;
* q5 broadcasts the maximum score, losers become followers (q3);
* q5 nodes that never hear of a larger score become candidates (q6) and run
  test phases in which each candidate emits a message of type 1 or 2 through
  the followers (q7); contradicting messages reveal a second candidate and
  trigger a restart (q8 -> everybody back to q0);
* a candidate surviving every test phase declares itself leader (q9); a q9
  turns everyone it meets into q10, and q9s duel via their bit until one is left.

Each agent's successor is computed by applying the one-sided rule to
(self, partner) on pre-interaction states, which makes the transition
symmetric by construction.

State code: ``off[family] + (index << shift[family]) + xg`` where ``xg`` packs
the X (A/B) and G (0/1) fields for families that carry them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .engine import (CONVERGED_CORRECT, CONVERGED_INCORRECT, HORIZON_EXHAUSTED, Configuration,
                     RunResult)
from .protocol import ProtocolDefinition, ProtocolParams, Target
from .rng import below_shift, select_pair

Q0, Q1, Q2, Q3, Q4, Q5, Q6, Q7, Q8, Q9, Q10 = range(11)
FAMILIES = 11
X_N, X_A, X_B = 0, 1, 2
G_N, G_0, G_1 = 0, 1, 2
LEADER, FOLLOWER = 0, 1

# table layout
(T_N, T_LN, T_K0, T_K1, T_K2, T_K4, T_K5, T_K6, T_J, T_S7, T_KP, T_I3, T_T7, T_SMAX) = range(14)
T_OFF = 16          # 12 entries: family offsets, T_OFF + 11 is the state count
T_SH = 28           # 11 entries: low bits used by X/G
TABLE_LEN = 40

_SHIFTS = (0, 1, 2, 2, 2, 2, 2, 2, 0, 0, 0)


@dataclass(frozen=True)
class Limits:
    """Integer counter limits derived from the constants and ``Ln``."""

    K0: int
    K1: int
    K2: int
    K4: int
    K5: int
    K6: int
    J: int
    S7: int
    Kp: int
    I3: int
    T7: int

    @property
    def SMAX(self) -> int:
        return 2 * self.K4

    @classmethod
    def of(cls, params: ProtocolParams) -> "Limits":
        ln, k = params.Ln, params.leader
        return cls(k.k0 * ln, k.k1 * ln, k.k2 * ln, k.k4 * ln, k.k5 * ln, k.k6i * ln, k.k6j * ln,
                   k.k7s * ln, k.k7k * ln, params.C ** 2 * ln, params.C ** 3 * ln * ln)

    def family_sizes(self) -> tuple[int, ...]:
        """Number of index values per family (before the X/G multiplicity)."""
        return (self.K0 + 1, self.K1 + 1, self.K2 + 1,
                (self.SMAX + 1) * (self.I3 + 1),
                (self.K4 + 1) * (self.K4 + 1),
                (self.SMAX + 1) * (self.K5 + 1),
                3 * (self.K6 + 1) * (self.J + 1),
                (self.T7 + 1) + 2 * (self.Kp + 1),
                1, 2, 1)


@dataclass(frozen=True)
class LeaderAgentState:
    """``family`` is 0..10 for q0..q10; ``idx`` holds the family's upper indices.

    q0/q1/q2: (i,); q3: (s, i); q4: (s, t); q5: (s, i); q6: (l, i, j);
    q7: (l, i); q8: (); q9: (bit,); q10: ().
    """

    family: int
    idx: tuple[int, ...] = ()
    X: int = X_N
    G: int = G_N

    def __str__(self) -> str:
        sup = ",".join(str(v) for v in self.idx)
        name = f"q{self.family}" + (f"^{sup}" if sup else "")
        if self.family in (Q8, Q9, Q10):
            return name
        return f"<{name},{'NAB'[self.X]},{'N01'[self.G]}>"


INITIAL = LeaderAgentState(Q0, (0,))


def build_table(params: ProtocolParams) -> np.ndarray:
    lim = Limits.of(params)
    if lim.Kp <= lim.S7:
        raise ValueError("the keep cutoff must exceed the spreading cutoff")
    table = np.zeros(TABLE_LEN, dtype=np.int64)
    table[:T_SMAX + 1] = (params.n, params.Ln, lim.K0, lim.K1, lim.K2, lim.K4, lim.K5, lim.K6, lim.J,
                          lim.S7, lim.Kp, lim.I3, lim.T7, lim.SMAX)
    off = 0
    for f, size in enumerate(lim.family_sizes()):
        table[T_OFF + f] = off
        table[T_SH + f] = _SHIFTS[f]
        off += size << _SHIFTS[f]
    table[T_OFF + FAMILIES] = off
    return table


# ---------------------------------------------------------------------------
# Python-side encoding (independent of the compiled decoder)

def _local_index(s: LeaderAgentState, lim: Limits) -> int:
    f, v = s.family, s.idx
    if f in (Q0, Q1, Q2):
        return v[0]
    if f == Q3:
        return v[0] * (lim.I3 + 1) + v[1]
    if f == Q4:
        return v[0] * (lim.K4 + 1) + v[1]
    if f == Q5:
        return v[0] * (lim.K5 + 1) + v[1]
    if f == Q6:
        return (v[0] * (lim.K6 + 1) + v[1]) * (lim.J + 1) + v[2]
    if f == Q7:
        return v[1] if v[0] == 0 else lim.T7 + 1 + (v[0] - 1) * (lim.Kp + 1) + v[1]
    if f == Q9:
        return v[0]
    return 0


def _bounds_ok(s: LeaderAgentState, lim: Limits) -> bool:
    f, v = s.family, s.idx
    hi = {Q0: (lim.K0,), Q1: (lim.K1,), Q2: (lim.K2,), Q3: (lim.SMAX, lim.I3), Q4: (lim.K4, lim.K4),
          Q5: (lim.SMAX, lim.K5), Q6: (2, lim.K6, lim.J), Q9: (1,), Q8: (), Q10: ()}
    if f == Q7:
        return len(v) == 2 and 0 <= v[0] <= 2 and 0 <= v[1] <= (lim.T7 if v[0] == 0 else lim.Kp)
    return len(v) == len(hi[f]) and all(0 <= a <= b for a, b in zip(v, hi[f]))


def encode(s: LeaderAgentState, params: ProtocolParams) -> int:
    lim = Limits.of(params)
    if not 0 <= s.family < FAMILIES or not _bounds_ok(s, lim):
        raise ValueError(f"state {s} out of range")
    sh = _SHIFTS[s.family]
    if sh == 0:
        xg = 0
    elif sh == 1:
        if s.X not in (X_A, X_B):
            raise ValueError(f"{s}: q1 needs X in A/B")
        xg = s.X - 1
    else:
        if s.X not in (X_A, X_B) or s.G not in (G_0, G_1):
            raise ValueError(f"{s}: X and G must be set from q2 on")
        xg = (s.X - 1) * 2 + (s.G - 1)
    table = _table(params)
    return int(table[T_OFF + s.family]) + (_local_index(s, lim) << sh) + xg


def decode(code: int, params: ProtocolParams) -> LeaderAgentState:
    lim = Limits.of(params)
    table = _table(params)
    offs = table[T_OFF:T_OFF + FAMILIES + 1]
    if not 0 <= code < offs[-1]:
        raise ValueError(f"code {code} out of range")
    f = int(np.searchsorted(offs, code, side="right")) - 1
    local = int(code - offs[f])
    sh = _SHIFTS[f]
    xg = local & ((1 << sh) - 1)
    k = local >> sh
    X = G = 0
    if sh == 1:
        X = xg + 1
    elif sh == 2:
        X, G = (xg >> 1) + 1, (xg & 1) + 1
    if f in (Q0, Q1, Q2):
        idx = (k,)
    elif f == Q3:
        idx = divmod(k, lim.I3 + 1)
    elif f == Q4:
        idx = divmod(k, lim.K4 + 1)
    elif f == Q5:
        idx = divmod(k, lim.K5 + 1)
    elif f == Q6:
        li, j = divmod(k, lim.J + 1)
        idx = divmod(li, lim.K6 + 1) + (j,)
    elif f == Q7:
        if k <= lim.T7:
            idx = (0, k)
        else:
            l1, i = divmod(k - lim.T7 - 1, lim.Kp + 1)
            idx = (l1 + 1, i)
    elif f == Q9:
        idx = (k,)
    else:
        idx = ()
    return LeaderAgentState(f, tuple(int(v) for v in idx), X, G)


_TABLES: dict = {}


def _table(params: ProtocolParams) -> np.ndarray:
    t = _TABLES.get(params)
    if t is None:
        t = _TABLES[params] = build_table(params)
    return t


# ---------------------------------------------------------------------------
# compiled transition

@njit(inline="always")
def _family(code, tb):
    # searched from the top: most of a run is spent in q3/q6/q7
    f = FAMILIES - 1
    while code < tb[T_OFF + f]:
        f -= 1
    return f


@njit(inline="always")
def _enc(f, k, xg, tb):
    return tb[T_OFF + f] + (k << tb[T_SH + f]) + xg


@njit(inline="always")
def _xg(f, x, g):
    if f == 1:
        return x - 1
    if 2 <= f <= 7:
        return (x - 1) * 2 + (g - 1)
    return 0


@njit(inline="always")
def _side(v, fv, kv, xv, gv, fu, ku, xu, gu, tb):
    """Successor of agent ``v`` after meeting ``u`` (both given pre-interaction)."""
    # ---- endgame: q10 / q9 / q8 / q0 absorption
    if fv == Q10:
        return v
    if fv == Q9:
        if fu == Q9:
            if kv == 0 and ku == 1:
                return _enc(Q9, 1, 0, tb)
            if kv == 1 and ku == 0:
                return _enc(Q10, 0, 0, tb)
            return v
        return _enc(Q9, 1 - kv, 0, tb)
    if fu == Q9 or fu == Q10:
        return _enc(Q10, 0, 0, tb)
    if fv == Q8 or fu == Q8:
        return tb[T_OFF + Q0]
    if fu == Q0 and fv != Q0 and fv != Q1:
        return tb[T_OFF + Q0]

    if fv == Q0:
        if fu == Q1:
            return _enc(Q1, 0, 1 if xu == X_A else 0, tb)
        if kv < tb[T_K0]:
            return v + 1
        return _enc(Q1, 0, 0, tb)

    if fv == Q1:
        if kv < tb[T_K1]:
            return v + 2
        return _enc(Q2, 0, _xg(Q2, xv, G_1 if xu == X_B else G_0), tb)

    if fv == Q2:
        if kv < tb[T_K2]:
            return v + 4
        return _enc(Q4, 0, _xg(Q4, xv, gv), tb)

    if fv == Q4:
        w = tb[T_K4] + 1
        s = kv // w
        t = kv - s * w
        if t < tb[T_K4]:
            if xu == X_A and gu == G_1:
                return v + (w + 1) * 4
            if xu == X_A and gu == G_0:
                return v + 4
            return v
        if xv == X_B:
            s += tb[T_K4]
        return _enc(Q5, s * (tb[T_K5] + 1), _xg(Q5, xv, gv), tb)

    if fv == Q5:
        w = tb[T_K5] + 1
        s = kv // w
        i = kv - s * w
        su = -1
        if fu == Q5:
            su = ku // w
        elif fu == Q3:
            su = ku // (tb[T_I3] + 1)
        if su > s:
            return _enc(Q3, su * (tb[T_I3] + 1), _xg(Q3, xv, gv), tb)
        if i < tb[T_K5]:
            return v + 4
        return _enc(Q6, 0, _xg(Q6, xv, gv), tb)

    if fv == Q3:
        w = tb[T_I3] + 1
        s = kv // w
        i = kv - s * w
        xg = _xg(Q3, xv, gv)
        # a follower in q3 reacts to messages exactly like q7^{0,0}
        if fu == Q6:
            wj = tb[T_J] + 1
            li = ku // wj
            lu = li // (tb[T_K6] + 1)
            iu = li - lu * (tb[T_K6] + 1)
            if lu != 0 and iu == 1:
                return _enc(Q7, tb[T_T7] + 1 + (lu - 1) * (tb[T_KP] + 1) + 1, xg, tb)
        elif fu == Q7:
            if ku <= tb[T_T7]:
                return _enc(Q7, 0, xg, tb)
            r = ku - tb[T_T7] - 1
            lu = 1 if r <= tb[T_KP] else 2
            iu = r - (lu - 1) * (tb[T_KP] + 1)
            if 0 < iu < tb[T_S7]:
                return _enc(Q7, tb[T_T7] + 1 + (lu - 1) * (tb[T_KP] + 1) + 1, xg, tb)
        if i >= tb[T_I3]:
            return _enc(Q7, 0, xg, tb)
        su = -1
        if fu == Q5:
            su = ku // (tb[T_K5] + 1)
        elif fu == Q3:
            su = ku // w
        if su > s:
            return _enc(Q3, su * w + i + 1, xg, tb)
        return v + 4

    if fv == Q6:
        wj = tb[T_J] + 1
        wk = tb[T_K6] + 1
        li = kv // wj
        j = kv - li * wj
        l = li // wk
        i = li - l * wk
        xg = _xg(Q6, xv, gv)
        if l == 0:
            if xu == X_A:
                return _enc(Q6, (1 * wk + 1) * wj + j, xg, tb)
            if xu == X_B:
                return _enc(Q6, (2 * wk + 1) * wj + j, xg, tb)
            return v
        if fu == Q6 or fu == Q5:
            return _enc(Q8, 0, 0, tb)
        if fu == Q7 and ku > tb[T_T7]:
            lu = 1 if ku - tb[T_T7] - 1 <= tb[T_KP] else 2
            if lu != l or i == 1:
                return _enc(Q8, 0, 0, tb)
        if i >= tb[T_K6]:
            if j < tb[T_J]:
                return _enc(Q6, j + 1, xg, tb)
            return _enc(Q9, 0, 0, tb)
        return v + wj * 4

    if fv == Q7:
        xg = _xg(Q7, xv, gv)
        T7 = tb[T_T7]
        wp = tb[T_KP] + 1
        if kv > T7:
            r = kv - T7 - 1
            l = 1 if r < wp else 2
            i = r - (l - 1) * wp
            if fu == Q5:
                return _enc(Q8, 0, 0, tb)
            lu = -1
            if fu == Q7:
                lu = 0 if ku <= T7 else (1 if ku - T7 - 1 < wp else 2)
                if lu != 0 and lu != l:
                    return _enc(Q8, 0, 0, tb)
            if i >= tb[T_KP]:
                return _enc(Q7, 0, xg, tb)
            if lu == 0 or lu == l or fu == Q3:
                return v + 4
            return v
        # listening follower q7^{0,i}
        if fu == Q6:
            wj = tb[T_J] + 1
            li = ku // wj
            lu = li // (tb[T_K6] + 1)
            iu = li - lu * (tb[T_K6] + 1)
            if lu != 0 and iu == 1:
                return _enc(Q7, T7 + 1 + (lu - 1) * wp + 1, xg, tb)
        elif fu == Q7 and ku > T7:
            r = ku - T7 - 1
            lu = 1 if r < wp else 2
            iu = r - (lu - 1) * wp
            if 0 < iu < tb[T_S7]:
                return _enc(Q7, T7 + 1 + (lu - 1) * wp + 1, xg, tb)
        if kv >= T7:
            return _enc(Q8, 0, 0, tb)
        return v + 4
    return v


@njit(inline="always")
def _split(code, tb):
    f = _family(code, tb)
    local = code - tb[T_OFF + f]
    sh = tb[T_SH + f]
    k = local >> sh
    xg = local - (k << sh)
    x = 0
    g = 0
    if sh == 1:
        x = xg + 1
    elif sh == 2:
        x = (xg >> 1) + 1
        g = (xg & 1) + 1
    return f, k, x, g


@njit(cache=True)
def leader_delta(a, b, tb):
    fa, ka, xa, ga = _split(a, tb)
    fb, kb, xb, gb = _split(b, tb)
    return (_side(a, fa, ka, xa, ga, fb, kb, xb, gb, tb),
            _side(b, fb, kb, xb, gb, fa, ka, xa, ga, tb))


@njit(cache=True)
def leader_output_code(a, tb):
    f = _family(a, tb)
    return LEADER if f == Q9 else FOLLOWER


def leader_transition(u: LeaderAgentState, v: LeaderAgentState,
                      params: ProtocolParams) -> tuple[LeaderAgentState, LeaderAgentState]:
    tb = _table(params)
    a, b = leader_delta(encode(u, params), encode(v, params), tb)
    return decode(int(a), params), decode(int(b), params)


def leader_output(s: LeaderAgentState) -> str:
    return "L" if s.family == Q9 else "F"


# ---------------------------------------------------------------------------
# configuration-level helpers

@njit(cache=True)
def family_counts(states, tb):
    cnt = np.zeros(FAMILIES, np.int64)
    for k in range(states.shape[0]):
        cnt[_family(states[k], tb)] += 1
    return cnt


@njit(cache=True)
def _scores(states, tb):
    """Score ``s`` of each agent in q3/q5, -1 for every other agent."""
    out = np.full(states.shape[0], -1, np.int64)
    for k in range(states.shape[0]):
        f, kk, x, g = _split(states[k], tb)
        if f == Q3:
            out[k] = kk // (tb[T_I3] + 1)
        elif f == Q5:
            out[k] = kk // (tb[T_K5] + 1)
    return out


def count_candidates(states: np.ndarray, params: ProtocolParams) -> int:
    """Agents that are candidates (q6) or may still become one (q5)."""
    cnt = family_counts(np.asarray(states, dtype=np.int64), _table(params))
    return int(cnt[Q6] + cnt[Q5])


def restart_count(config: Configuration) -> int:
    """Cumulative agent resets to ``<q0^0,N,N>`` from other families seen by runs of ``config``."""
    return int(config.counters.get("resets", 0))


def vmax_size(states: np.ndarray, params: ProtocolParams) -> int:
    """Number of q5 agents holding the largest score present among q3/q5 agents."""
    tb = _table(params)
    states = np.asarray(states, dtype=np.int64)
    s = _scores(states, tb)
    if s.max() < 0:
        return 0
    fam = np.array([int(_family(x, tb)) for x in states])
    return int(np.count_nonzero((s == s.max()) & (fam == Q5)))


def _stable_counts(cnt, n, q9_zero):
    q9 = cnt[Q9]
    if q9 + cnt[Q10] != n:
        return False
    return q9 <= 1 or (cnt[Q10] == 0 and (q9_zero == 0 or q9_zero == q9))


def stable_states(states: np.ndarray, params: ProtocolParams) -> bool:
    tb = _table(params)
    cnt = family_counts(states, tb)
    q9_zero = int(np.count_nonzero(states == tb[T_OFF + Q9]))
    return bool(_stable_counts(cnt, len(states), q9_zero))


def selection_done(states: np.ndarray, params: ProtocolParams) -> bool:
    """True once no agent is still in q0, q1, q2 or q4 (the score contest is over)."""
    cnt = family_counts(states, _table(params))
    return int(cnt[Q0] + cnt[Q1] + cnt[Q2] + cnt[Q4]) == 0


def observe(a: int, b: int, a2: int, b2: int, counters: dict, params: ProtocolParams) -> None:
    tb = _table(params)
    reset = tb[T_OFF + Q0]
    for old, new in ((a, a2), (b, b2)):
        if new == reset and old >= tb[T_OFF + Q1]:
            counters["resets"] = counters.get("resets", 0) + 1


# ---------------------------------------------------------------------------
# run kernel

@njit(inline="always")
def _done(cnt, q9_zero, n, selection):
    if selection:
        return cnt[Q0] + cnt[Q1] + cnt[Q2] + cnt[Q4] == 0
    q9 = cnt[Q9]
    if q9 + cnt[Q10] != n:
        return False
    return q9 <= 1 or (cnt[Q10] == 0 and (q9_zero == 0 or q9_zero == q9))


@njit(cache=True)
def _run_kernel(states, st, shift, steps, horizon, instrument, tb, selection):
    n = states.shape[0]
    cnt = np.zeros(FAMILIES, np.int64)
    for k in range(n):
        cnt[_family(states[k], tb)] += 1
    q9_zero = 0
    q6_000 = 0
    c_q9z = tb[T_OFF + Q9]
    c_q6000 = tb[T_OFF + Q6]
    c_reset = tb[T_OFF + Q0]
    for k in range(n):
        if states[k] == c_q9z:
            q9_zero += 1
        if 0 <= states[k] - c_q6000 < 4:
            q6_000 += 1
    conv = steps if cnt[Q9] == 1 else -1

    restarts = 0
    resets = 0
    first_q6 = -1
    q4_at_first_q6 = -1
    whp = -1
    first_epoch_candidates = 0
    s_violations = 0
    seen_q4 = cnt[Q4] > 0
    vmax_done = False
    vmax = -1

    stop = _done(cnt, q9_zero, n, selection)
    while not stop and steps < horizon:
        i, j = select_pair(st, n, shift)
        a = states[i]
        b = states[j]
        fa, ka, xa, ga = _split(a, tb)
        fb, kb, xb, gb = _split(b, tb)
        a2 = _side(a, fa, ka, xa, ga, fb, kb, xb, gb, tb)
        b2 = _side(b, fb, kb, xb, gb, fa, ka, xa, ga, tb)
        steps += 1
        if a2 == a and b2 == b:
            continue
        states[i] = a2
        states[j] = b2
        fa2 = _family(a2, tb)
        fb2 = _family(b2, tb)
        if (fa2 == Q8 and fa != Q8) or (fb2 == Q8 and fb != Q8):
            if cnt[Q8] == 0 and cnt[Q0] == 0:
                restarts += 1
        cnt[fa] -= 1
        cnt[fb] -= 1
        cnt[fa2] += 1
        cnt[fb2] += 1
        q9_zero += (a2 == c_q9z) + (b2 == c_q9z) - (a == c_q9z) - (b == c_q9z)
        q6_000 += ((0 <= a2 - c_q6000 < 4) + (0 <= b2 - c_q6000 < 4)
                   - (0 <= a - c_q6000 < 4) - (0 <= b - c_q6000 < 4))
        resets += (a2 == c_reset and fa != Q0) + (b2 == c_reset and fb != Q0)
        new_q6 = (fa2 == Q6 and fa == Q5) + (fb2 == Q6 and fb == Q5)
        if new_q6 > 0:
            if first_q6 < 0:
                first_q6 = steps
                q4_at_first_q6 = cnt[Q4]
            if restarts == 0:
                first_epoch_candidates += new_q6
        if whp < 0 and cnt[Q6] == 1 and q6_000 == 1 and cnt[Q3] == n - 1:
            whp = steps
        if cnt[Q4] > 0:
            seen_q4 = True
        elif seen_q4 and not vmax_done:
            vmax_done = True
            s = _scores(states, tb)
            smax = s.max()
            vmax = 0
            if smax >= 0:
                for k in range(n):
                    if s[k] == smax and _family(states[k], tb) == Q5:
                        vmax += 1
        if instrument:
            for old, fo, ko, new, fn in ((a, fa, ka, a2, fa2), (b, fb, kb, b2, fb2)):
                if (fo == Q3 or fo == Q5) and (fn == Q3 or fn == Q5):
                    so = ko // (tb[T_I3] + 1) if fo == Q3 else ko // (tb[T_K5] + 1)
                    kn = (new - tb[T_OFF + fn]) >> 2
                    sn = kn // (tb[T_I3] + 1) if fn == Q3 else kn // (tb[T_K5] + 1)
                    if sn < so:
                        s_violations += 1
        if cnt[Q9] == 1:
            if conv < 0:
                conv = steps
        else:
            conv = -1
        stop = _done(cnt, q9_zero, n, selection)
    return (steps, conv, stop, restarts, resets, first_q6, q4_at_first_q6, whp,
            first_epoch_candidates, vmax, s_violations)


def _make_fast_run(selection: bool):
    def fast_run(config: Configuration, protocol: ProtocolDefinition, horizon: int,
                 instrument: bool) -> RunResult:
        out = _run_kernel(config.states, config.rng.state, below_shift(config.n), config.steps, horizon,
                          instrument, protocol.table, selection)
        (steps, conv, stop, restarts, resets, first_q6, q4_first, whp, cands, vmax, s_viol) = (
            int(x) for x in out)
        config.steps = steps
        config.counters["resets"] = config.counters.get("resets", 0) + resets
        conv = None if conv < 0 else conv
        if stop:
            outcome = CONVERGED_CORRECT if conv is not None else CONVERGED_INCORRECT
        else:
            outcome = HORIZON_EXHAUSTED
        aux = {"restarts": restarts, "resets": resets, "first_q6_step": first_q6,
               "q4_at_first_q6": q4_first, "whp_step": whp, "first_epoch_candidates": cands,
               "vmax_size": vmax}
        if instrument:
            aux["s_monotonicity_violations"] = s_viol
        return RunResult(config.n, conv, config.steps, outcome, aux)
    return fast_run


def default_horizon(params: ProtocolParams) -> int:
    k = params.leader
    return 8 * k.k6i * k.k6j * (params.n // 2) * params.Ln ** 2


def protocol(params: ProtocolParams, stop: str = "stable") -> ProtocolDefinition:
    """Leader election; ``stop="selection"`` ends runs once the score contest is over."""
    if stop not in ("stable", "selection"):
        raise ValueError(f"unknown stop mode {stop!r}")
    table = _table(params)
    selection = stop == "selection"
    predicate = selection_done if selection else stable_states
    return ProtocolDefinition(
        name="bcer-leader",
        params=params,
        n_states=int(table[T_OFF + FAMILIES]),
        table=table,
        kernel_delta=leader_delta,
        kernel_output=leader_output_code,
        init=lambda agent, scenario: int(table[T_OFF + Q0]),
        target=lambda scenario: Target(LEADER, exactly_one=True),
        output_labels=("L", "F"),
        encode=lambda s: encode(s, params),
        decode=lambda code: decode(code, params),
        stable=lambda states: predicate(states, params),
        fast_run=_make_fast_run(selection),
        observe=lambda a, b, a2, b2, counters: observe(a, b, a2, b2, counters, params),
    )
