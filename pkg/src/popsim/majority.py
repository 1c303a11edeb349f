"""Stable exact-majority protocol: eleven phases plus the counter subroutine.

Agents carry a phase field that spreads by max-epidemic; a lagging agent
runs the Init block of every phase it skips, in order.  Two Init blocks can
escape straight to the stable backup (phase 10): entering phase 1 while
still undecided about a role, or entering phase 2 with |bias| > 1.

Fields outside their phase window are reset to canonical inert values so
the number of distinct reachable states stays O(log n); see
``audit_state_space``.

Bias bookkeeping: in phases 0..2 ``bias`` is the integer field itself; from
phase 3 on a biased agent represents opinion * 2**exponent and an agent with
``full=True`` represents a magnitude in [2**(exponent-1), 2**exponent) that
it no longer tracks exactly.  The engine audits all of this each interaction
via the mass hooks at the bottom of this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .protocol import PredicateDef, ProtocolSpec, Randomized

ROLE_MCR = "MCR"
ROLE_CR = "CR"
MAIN = "Main"
CLOCK = "Clock"
RESERVE = "Reserve"
ROLE_NONE = "none"  # inert value once an agent is in the backup phase

_EMPTY: frozenset = frozenset()
_TIMED_PHASES = (0, 1, 3, 5, 6, 7, 8)


@dataclass(frozen=True)
class MajorityParams:
    """Knobs of the majority protocol for a given population size.

    ``L`` defaults to ceil(log2 n).  Counters for timed phase i start at
    ceil(c_i * log2 n); the default multiplier 5 for every phase matches
    the small constants that are known to work at simulation scale (the
    correctness proofs want larger ones).  ``k`` is minutes per hour and
    ``p`` the drip probability of the phase-3 clock.
    """

    n: int
    L: int = 0
    k: int = 2
    p: float = 0.1
    c0: float = 5.0
    c1: float = 5.0
    c2: float = 5.0  # unused: phase 2 is untimed
    c3: float = 5.0
    c4: float = 5.0  # unused: phase 4 is untimed
    c5: float = 5.0
    c6: float = 5.0
    c7: float = 5.0
    c8: float = 5.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.L == 0:
            object.__setattr__(self, "L", max(1, math.ceil(math.log2(self.n))))
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.L > 58:
            raise ValueError("L > 58 would overflow exact 64-bit mass tracking")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        for i in _TIMED_PHASES:
            if getattr(self, f"c{i}") <= 0:
                raise ValueError(f"c{i} must be positive")

    def counter(self, phase: int) -> int:
        return math.ceil(getattr(self, f"c{phase}") * math.log2(self.n))

    @property
    def max_minute(self) -> int:
        return self.k * self.L


def paper_sim_params(n: int, **overrides) -> MajorityParams:
    """Preset mirroring the paper-scale simulations: k=2, p=0.1."""
    return MajorityParams(n=n, **{"k": 2, "p": 0.1, **overrides})


def paper_proof_params(n: int, **overrides) -> MajorityParams:
    """Preset with the constants the correctness proofs ask for: k=45, p=1."""
    return MajorityParams(n=n, **{"k": 45, "p": 1.0, **overrides})


PRESETS = {"paper-sim": paper_sim_params, "paper-proof": paper_proof_params}


class AgentState(NamedTuple):
    input: str           # 'A' or 'B', read-only
    output: str          # 'A', 'B' or 'T'
    phase: int           # 0..10, nondecreasing
    role: str
    assigned: bool       # phase 0 only
    bias: int            # integer bias, phases 0..2
    opinion: int         # sign of the represented bias, -1/0/+1
    exponent: int        # biased agents, phases 3..9 (in [-L, 0])
    hour: int            # unbiased Main agents, phase 3
    minute: int          # Clock agents, phase 3
    counter: int         # Clock agents, timed phases
    sample: Optional[int]  # Reserve agents, phases 5..6 (None = unset)
    full: bool           # biased agents, phases 8..9
    opinions: frozenset  # opinion sets, phases 2 and 9
    active: bool         # backup phase


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


class MajoritySpec(ProtocolSpec):
    name = "majority"
    supports_mass = True

    def __init__(self, params: MajorityParams):
        self.params = params

    # -- initialization ----------------------------------------------------

    def init(self, symbol: str) -> AgentState:
        if symbol not in ("A", "B"):
            raise ValueError(f"input symbol must be 'A' or 'B', got {symbol!r}")
        bias = 1 if symbol == "A" else -1
        return AgentState(
            input=symbol, output=symbol, phase=0, role=ROLE_MCR, assigned=False,
            bias=bias, opinion=bias, exponent=0, hour=0, minute=0, counter=0,
            sample=None, full=False, opinions=_EMPTY, active=False)

    # -- phase entry -------------------------------------------------------

    def _to_backup(self, s: AgentState) -> AgentState:
        return AgentState(
            input=s.input, output=s.input, phase=10, role=ROLE_NONE, assigned=False,
            bias=0, opinion=0, exponent=0, hour=0, minute=0, counter=0,
            sample=None, full=False, opinions=_EMPTY, active=True)

    def phase_init(self, s: AgentState, newphase: int) -> AgentState:
        """Advance ``s`` into ``newphase`` (= s.phase + 1), running that
        phase's Init block; error escapes jump straight to the backup."""
        if newphase != s.phase + 1:
            raise ValueError(f"phase_init must advance by one ({s.phase} -> {newphase})")
        P = self.params
        if newphase == 1:
            if s.role == ROLE_MCR:
                return self._to_backup(s)  # undonated bias: error, skip to backup
            role = RESERVE if s.role == ROLE_CR else s.role
            counter = P.counter(1) if role == CLOCK else 0
            return s._replace(phase=1, role=role, assigned=False, counter=counter)
        if newphase == 2:
            if abs(s.bias) > 1:
                return self._to_backup(s)
            return s._replace(phase=2, counter=0, opinions=frozenset((s.opinion,)))
        if newphase == 3:
            out = s._replace(phase=3, opinions=_EMPTY, bias=0)
            if out.role == MAIN:
                out = out._replace(exponent=0) if out.opinion != 0 else out._replace(hour=0)
            elif out.role == CLOCK:
                out = out._replace(minute=0, counter=P.counter(3))
            return out
        if newphase == 4:
            return s._replace(phase=4, output="T", hour=0, minute=0, counter=0)
        if newphase == 5:
            out = s._replace(phase=5)
            if out.role == RESERVE:
                out = out._replace(sample=None)
            elif out.role == CLOCK:
                out = out._replace(counter=P.counter(5))
            return out
        if newphase == 6:
            return s._replace(phase=6, counter=P.counter(6)) if s.role == CLOCK else s._replace(phase=6)
        if newphase == 7:
            out = s._replace(phase=7, sample=None)
            return out._replace(counter=P.counter(7)) if out.role == CLOCK else out
        if newphase == 8:
            out = s._replace(phase=8, full=False)
            return out._replace(counter=P.counter(8)) if out.role == CLOCK else out
        if newphase == 9:
            return s._replace(phase=9, counter=0, opinions=frozenset((s.opinion,)))
        if newphase == 10:
            return self._to_backup(s)
        raise ValueError(f"no phase {newphase}")

    def _counter_sub(self, c: AgentState) -> AgentState:
        c = c._replace(counter=c.counter - 1)
        if c.counter == 0:
            c = self.phase_init(c, c.phase + 1)
        return c

    # -- transition --------------------------------------------------------

    def _equalize(self, u: AgentState, v: AgentState) -> tuple:
        while u.phase != v.phase:
            if u.phase < v.phase:
                u = self.phase_init(u, u.phase + 1)
            else:
                v = self.phase_init(v, v.phase + 1)
        return u, v

    def transition_outcomes(self, u: AgentState, v: AgentState):
        u, v = self._equalize(u, v)
        body = self._BODIES[u.phase]
        return body(self, u, v)

    def _phase0(self, u: AgentState, v: AgentState):
        P = self.params
        if u.role == ROLE_MCR and v.role == ROLE_MCR:
            u = u._replace(role=MAIN, bias=u.bias + v.bias)
            u = u._replace(opinion=_sign(u.bias))
            v = v._replace(role=ROLE_CR, bias=0, opinion=0)
        elif u.role == ROLE_MCR and v.role == MAIN and not v.assigned:
            v = v._replace(assigned=True, bias=v.bias + u.bias)
            v = v._replace(opinion=_sign(v.bias))
            u = u._replace(role=ROLE_CR, bias=0, opinion=0)
        elif v.role == ROLE_MCR and u.role == MAIN and not u.assigned:
            u = u._replace(assigned=True, bias=u.bias + v.bias)
            u = u._replace(opinion=_sign(u.bias))
            v = v._replace(role=ROLE_CR, bias=0, opinion=0)
        elif u.role == ROLE_MCR and v.role in (ROLE_CR, CLOCK, RESERVE) and not v.assigned:
            v = v._replace(assigned=True)
            u = u._replace(role=MAIN)
        elif v.role == ROLE_MCR and u.role in (ROLE_CR, CLOCK, RESERVE) and not u.assigned:
            u = u._replace(assigned=True)
            v = v._replace(role=MAIN)
        elif u.role == ROLE_CR and v.role == ROLE_CR:
            u = u._replace(role=CLOCK, counter=P.counter(0))
            v = v._replace(role=RESERVE)
        elif u.role == CLOCK and v.role == CLOCK:
            u = self._counter_sub(u)
            v = self._counter_sub(v)
        return u, v

    def _phase1(self, u: AgentState, v: AgentState):
        if u.role == MAIN and v.role == MAIN:
            s = u.bias + v.bias
            lo, hi = s // 2, -((-s) // 2)
            u = u._replace(bias=lo, opinion=_sign(lo))
            v = v._replace(bias=hi, opinion=_sign(hi))
        if u.role == CLOCK:
            u = self._counter_sub(u)
        if v.role == CLOCK:
            v = self._counter_sub(v)
        return u, v

    def _consensus(self, u: AgentState, v: AgentState):
        merged = u.opinions | v.opinions
        u = u._replace(opinions=merged)
        v = v._replace(opinions=merged)
        if -1 in merged and 1 in merged:
            u = self.phase_init(u, u.phase + 1)
            v = self.phase_init(v, v.phase + 1)
        elif 1 in merged:
            u, v = u._replace(output="A"), v._replace(output="A")
        elif -1 in merged:
            u, v = u._replace(output="B"), v._replace(output="B")
        elif merged == {0}:
            u, v = u._replace(output="T"), v._replace(output="T")
        return u, v

    def _phase3(self, u: AgentState, v: AgentState):
        P = self.params
        if u.role == CLOCK and v.role == CLOCK:
            if u.minute != v.minute:
                m = max(u.minute, v.minute)
                return u._replace(minute=m), v._replace(minute=m)
            if u.minute < P.max_minute:
                fired = (u._replace(minute=u.minute + 1), v)
                if P.p == 1.0:
                    return fired
                return Randomized(P.p, fire=fired, skip=(u, v))
            return self._counter_sub(u), self._counter_sub(v)

        for m, c, flip in ((u, v, False), (v, u, True)):
            if m.role == MAIN and m.opinion == 0 and c.role == CLOCK:
                m = m._replace(hour=max(m.hour, c.minute // P.k))
                return (c, m) if flip else (m, c)

        if u.role == MAIN and v.role == MAIN:
            if {u.opinion, v.opinion} == {-1, 1} and u.exponent == v.exponent:
                h = -u.exponent
                u = u._replace(opinion=0, exponent=0, hour=h)
                v = v._replace(opinion=0, exponent=0, hour=h)
            for t, i, flip in ((u, v, False), (v, u, True)):
                if t.opinion == 0 and i.opinion != 0 and t.hour > -i.exponent:
                    t = t._replace(opinion=i.opinion, exponent=i.exponent - 1, hour=0)
                    i = i._replace(exponent=i.exponent - 1)
                    return (i, t) if flip else (t, i)
        return u, v

    def _phase4(self, u: AgentState, v: AgentState):
        L = self.params.L
        if (u.opinion != 0 and u.exponent > -L) or (v.opinion != 0 and v.exponent > -L):
            return self.phase_init(u, 5), self.phase_init(v, 5)
        return u, v

    def _phase5(self, u: AgentState, v: AgentState):
        for r, m, flip in ((u, v, False), (v, u, True)):
            if r.role == RESERVE and m.role == MAIN and m.opinion != 0:
                if r.sample is None:
                    r = r._replace(sample=m.exponent)
                u, v = (m, r) if flip else (r, m)
                break
        if u.role == CLOCK:
            u = self._counter_sub(u)
        if v.role == CLOCK:
            v = self._counter_sub(v)
        return u, v

    def _phase6(self, u: AgentState, v: AgentState):
        for r, m, flip in ((u, v, False), (v, u, True)):
            if r.role == RESERVE and m.role == MAIN and m.opinion != 0:
                if r.sample is not None and r.sample < m.exponent:
                    r = r._replace(role=MAIN, opinion=m.opinion,
                                   exponent=m.exponent - 1, sample=None)
                    m = m._replace(exponent=m.exponent - 1)
                u, v = (m, r) if flip else (r, m)
                break
        if u.role == CLOCK:
            u = self._counter_sub(u)
        if v.role == CLOCK:
            v = self._counter_sub(v)
        return u, v

    def _phase7(self, u: AgentState, v: AgentState):
        if u.role == MAIN and v.role == MAIN and {u.opinion, v.opinion} == {-1, 1}:
            if u.exponent == v.exponent:
                u = u._replace(opinion=0, exponent=0)
                v = v._replace(opinion=0, exponent=0)
            else:
                for i, j, flip in ((u, v, False), (v, u, True)):
                    if i.exponent == j.exponent + 1:
                        i = i._replace(exponent=i.exponent - 1)
                        j = j._replace(opinion=0, exponent=0)
                        u, v = (j, i) if flip else (i, j)
                        break
                    if i.exponent == j.exponent + 2:
                        # exact decomposition 2^e - 2^(e-2) = 2^(e-1) + 2^(e-2)
                        j = j._replace(opinion=i.opinion, exponent=i.exponent - 2)
                        i = i._replace(exponent=i.exponent - 1)
                        u, v = (j, i) if flip else (i, j)
                        break
        if u.role == CLOCK:
            u = self._counter_sub(u)
        if v.role == CLOCK:
            v = self._counter_sub(v)
        return u, v

    def _phase8(self, u: AgentState, v: AgentState):
        if u.role == MAIN and v.role == MAIN and {u.opinion, v.opinion} == {-1, 1}:
            for i, j, flip in ((u, v, False), (v, u, True)):
                if i.exponent > j.exponent and not i.full:
                    i = i._replace(full=True)
                    j = j._replace(opinion=0, exponent=0, full=False)
                    u, v = (j, i) if flip else (i, j)
                    break
        if u.role == CLOCK:
            u = self._counter_sub(u)
        if v.role == CLOCK:
            v = self._counter_sub(v)
        return u, v

    def _phase10(self, u: AgentState, v: AgentState):
        if u.active and v.active:
            if {u.output, v.output} == {"A", "B"}:
                u = u._replace(output="T")
                v = v._replace(output="T")
            else:
                for i, t, flip in ((u, v, False), (v, u, True)):
                    if i.output in ("A", "B") and t.output == "T":
                        t = t._replace(output=i.output, active=False)
                        u, v = (t, i) if flip else (i, t)
                        break
        if u.active and not v.active:
            v = v._replace(output=u.output)
        elif v.active and not u.active:
            u = u._replace(output=v.output)
        return u, v

    _BODIES = {0: _phase0, 1: _phase1, 2: _consensus, 3: _phase3, 4: _phase4,
               5: _phase5, 6: _phase6, 7: _phase7, 8: _phase8, 9: _consensus,
               10: _phase10}

    # -- engine hooks --------------------------------------------------------

    def marker(self, s: AgentState) -> int:
        return s.phase

    def max_marker(self) -> int:
        return 10

    def output(self, s: AgentState) -> str:
        return s.output

    def predicates(self) -> dict:
        preds = {}
        for k in range(1, 11):
            preds[f"all_phase_ge_{k}"] = PredicateDef("all_marker_ge", k)
            preds[f"any_phase_ge_{k}"] = PredicateDef("any_marker_ge", k)
        return preds

    def order_sensitive(self, a: AgentState, b: AgentState) -> bool:
        """Rules whose effect legitimately depends on draw order: which of
        two undecided agents becomes Main (phase 0), which undecided-CR
        becomes the Clock (phase 0), who gets the floor of an odd average
        (phase 1), and which of two equal-minute clocks drips (phase 3).
        The uniform ordered pair draw makes each orientation a fair coin.
        """
        a, b = self._equalize(a, b)
        if a.phase == 0:
            return (a.role == b.role == ROLE_MCR) or (a.role == b.role == ROLE_CR)
        if a.phase == 1:
            return a.role == b.role == MAIN and (a.bias + b.bias) % 2 != 0
        if a.phase == 3:
            return (a.role == b.role == CLOCK and a.minute == b.minute
                    and a.minute < self.params.max_minute)
        return False

    # -- exact mass accounting (engine-audited invariants) -------------------

    def initial_mass(self, s: AgentState) -> int:
        return s.bias << self.params.L

    def expected_mass(self, s: AgentState) -> Optional[int]:
        """Exact represented mass in units of 2**-L, or None when the agent
        no longer tracks it (full agents, backup phase)."""
        L = self.params.L
        if s.phase >= 10:
            return None
        if s.phase <= 2:
            return s.bias << L
        if s.opinion == 0:
            return 0
        if s.full:
            return None
        return s.opinion * (1 << (L + s.exponent))

    def mass_interval(self, s: AgentState) -> Optional[tuple]:
        """(lo, hi, sign) with |mass| in [lo, hi) for full agents."""
        if s.phase >= 10 or not s.full or s.opinion == 0:
            return None
        L = self.params.L
        e = L + s.exponent
        if e < 1:
            return None  # unreachable: a consumer sits above the bottom exponent
        return (1 << (e - 1), 1 << e, s.opinion)

    def mass_rules(self, a, b, a2, b2) -> tuple:
        return (self._mass_rule(a, a2), self._mass_rule(b, b2))

    def _mass_rule(self, old: AgentState, new: AgentState) -> str:
        if self.expected_mass(new) is not None:
            return "det"
        if new.full and not old.full:
            return "sum"  # consumption: absorb the partner's exact mass
        return "keep"  # full agents in later phases, backup freeze


# -- standalone pieces ------------------------------------------------------


class BackupState(NamedTuple):
    input: str
    output: str
    active: bool


class BackupSpec(ProtocolSpec):
    """The six-state stable backup as a protocol of its own."""

    name = "backup"

    def init(self, symbol: str) -> BackupState:
        if symbol not in ("A", "B"):
            raise ValueError(f"input symbol must be 'A' or 'B', got {symbol!r}")
        return BackupState(input=symbol, output=symbol, active=True)

    def transition_outcomes(self, u: BackupState, v: BackupState):
        if u.active and v.active:
            if {u.output, v.output} == {"A", "B"}:
                u = u._replace(output="T")
                v = v._replace(output="T")
            else:
                for i, t, flip in ((u, v, False), (v, u, True)):
                    if i.output in ("A", "B") and t.output == "T":
                        t = t._replace(output=i.output, active=False)
                        u, v = (t, i) if flip else (i, t)
                        break
        if u.active and not v.active:
            v = v._replace(output=u.output)
        elif v.active and not u.active:
            u = u._replace(output=v.output)
        return u, v

    def output(self, s: BackupState) -> str:
        return s.output


def backup_transition(u: BackupState, v: BackupState) -> tuple:
    """Deterministic body of the backup phase (it consumes no randomness)."""
    return BackupSpec().transition_outcomes(u, v)


def exact_majority_oracle(count_a: int, count_b: int) -> str:
    """Ground truth output for initial counts (sign comparison)."""
    if count_a > count_b:
        return "A"
    if count_b > count_a:
        return "B"
    return "T"


def majority_inputs(n: int, gap: int) -> list:
    """Input list with count(A) - count(B) == gap; (n + gap) must be even."""
    if abs(gap) > n:
        raise ValueError(f"|gap| = {abs(gap)} exceeds n = {n}")
    if (n + gap) % 2 != 0:
        raise ValueError(f"n + gap must be even (n={n}, gap={gap})")
    n_a = (n + gap) // 2
    return ["A"] * n_a + ["B"] * (n - n_a)


# module-level views of the spec operations, handy for tests and docs


def majority_init(symbol: str, params: MajorityParams) -> AgentState:
    return MajoritySpec(params).init(symbol)


def majority_transition(u: AgentState, v: AgentState, params: MajorityParams, rng):
    return MajoritySpec(params).transition(u, v, rng)


def counter_subroutine(c: AgentState, params: MajorityParams) -> AgentState:
    if c.role != CLOCK or c.phase not in _TIMED_PHASES or c.counter <= 0:
        raise ValueError("counter subroutine needs a Clock agent with an active counter")
    return MajoritySpec(params)._counter_sub(c)


def phase_init(a: AgentState, newphase: int, params: MajorityParams) -> AgentState:
    return MajoritySpec(params).phase_init(a, newphase)


def audit_state_space(params: MajorityParams, cap: int = 400) -> dict:
    """Closure of states producible from the two input states, bucketed by
    phase.  The closure assumes any two discovered states can meet, so it
    upper-bounds true reachability; the total must stay below cap * log2(n),
    which operationalizes the O(log n)-states guarantee.
    """
    spec = MajoritySpec(params)
    seen = {spec.init("A"), spec.init("B")}
    frontier = list(seen)
    while frontier:
        new = []
        snapshot = list(seen)
        for s1 in frontier:
            for s2 in snapshot:
                for x, y in ((s1, s2), (s2, s1)):
                    out = spec.transition_outcomes(x, y)
                    branches = (out.fire, out.skip) if isinstance(out, Randomized) else (out,)
                    for branch in branches:
                        for st in branch:
                            if st not in seen:
                                seen.add(st)
                                new.append(st)
        frontier = new
    per_phase: dict = {}
    for st in seen:
        per_phase[st.phase] = per_phase.get(st.phase, 0) + 1
    total = len(seen)
    bound = cap * math.log2(params.n)
    if total > bound:
        raise AssertionError(
            f"state space {total} exceeds {cap}*log2(n) = {bound:.0f}")
    per_phase["total"] = total
    return per_phase
