"""Uniform-random pairwise interaction engine.

A :class:`Population` owns the agent array, the RNG stream, and per-run
bookkeeping; pair outcomes come from a :class:`TransitionTable` that is
filled lazily and can be shared between runs of the same protocol, so
repeated trials pay the Python transition cost only once.

One interaction = one uniformly random unordered pair of distinct agents;
null interactions advance the interaction counter like any other, and
parallel time is ``interactions / n`` exactly.

Replay: (seed, inputs, protocol parameters, stop condition) fully
determine the interaction sequence, the trajectory, and every recorded
artifact.  The single-step path (:func:`step`) and the batch path
(:func:`run_until`) execute the same compiled kernel, so they can be
interleaved freely without breaking replay.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Sequence, Union

import numpy as np

from . import _kernel as K
from . import rng as _rng
from .protocol import OUTPUT_SYMBOLS, PredicateDef, ProtocolSpec, Randomized, output_class


class EngineError(Exception):
    pass


# --------------------------------------------------------------------------
# Stop conditions


@dataclass(frozen=True)
class Silent:
    """Stop once no applicable pair can change state."""


@dataclass(frozen=True)
class MaxParallelTime:
    t: float

    def __post_init__(self):
        if self.t < 0:
            raise EngineError(f"MaxParallelTime must be >= 0, got {self.t}")


@dataclass(frozen=True)
class MaxInteractions:
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise EngineError(f"MaxInteractions must be >= 0, got {self.k}")


@dataclass(frozen=True)
class Predicate:
    name: str


StopCondition = Union[Silent, MaxParallelTime, MaxInteractions, Predicate]

_PRED_KINDS = {"all_marker_ge": 1, "any_marker_ge": 2, "count_ge": 3, "count_le": 4}


@dataclass(frozen=True)
class InteractionRecord:
    i: int
    j: int
    before: tuple
    after: tuple
    changed: bool


@dataclass
class CrossingData:
    """First-crossing interaction indices per marker level (-1 = never)."""

    plus: np.ndarray
    q01: np.ndarray
    q09: np.ndarray
    q0001: np.ndarray
    n: int

    def time(self, arr: np.ndarray, level: int) -> Optional[float]:
        v = int(arr[level])
        return None if v < 0 else v / self.n


@dataclass
class RunResult:
    population: "Population"
    interactions: int
    parallel_time: float
    stopped_by: StopCondition
    silent: bool
    stabilization_time: Optional[float]
    output: Optional[str]
    hit_guard: bool
    last_change_time: float
    raw_timeline: list = field(default_factory=list)
    mass_violations: int = 0
    first_mass_violation: Optional[int] = None
    crossings: Optional[CrossingData] = None

    def counts(self) -> dict:
        return self.population.state_counts()


# --------------------------------------------------------------------------
# Shared transition table


class TransitionTable:
    """Interned states plus the (lazily filled) pair-outcome table for one
    protocol.  Safe to share across populations of the same protocol; all
    content is a pure function of the protocol, so sharing never affects
    trajectories."""

    def __init__(self, spec: ProtocolSpec):
        self.spec = spec
        self.supports_mass = bool(getattr(spec, "supports_mass", False))
        self.states: list = []
        self.index: dict = {}
        cap = 64
        self.cap = cap
        self.row_of = np.full(cap, -1, np.int32)
        self.marker_of = np.zeros(cap, np.int32)
        self.outclass_of = np.full(cap, -1, np.int8)
        self.mass_of = np.full(cap, K.MASS_UNDET, np.int64)
        self.mass_lo = np.zeros(cap, np.int64)
        self.mass_hi = np.zeros(cap, np.int64)
        self.mass_sign = np.zeros(cap, np.int8)
        self.rows = 0
        self.pool = np.full((64, cap), -1, np.int32)

        ecap = 256
        self.ecap = ecap
        self.num_entries = 0
        self.ent_kind = np.zeros(ecap, np.int8)
        self.ent_aout = np.zeros(ecap, np.int32)
        self.ent_bout = np.zeros(ecap, np.int32)
        self.ent_alt_aout = np.zeros(ecap, np.int32)
        self.ent_alt_bout = np.zeros(ecap, np.int32)
        self.ent_thresh = np.zeros(ecap, np.uint64)
        self.ent_massrule = np.zeros(ecap, np.int8)
        self.ent_massrule2 = np.zeros(ecap, np.int8)
        self._new_entry(K.K_NULL, 0, 0, 0, 0, 0, 0, 0)  # entry 0: shared null

    def _grow_ids(self) -> None:
        new_cap = self.cap * 2
        for name in ("row_of", "marker_of", "outclass_of",
                     "mass_of", "mass_lo", "mass_hi", "mass_sign"):
            old = getattr(self, name)
            grown = np.zeros(new_cap, old.dtype)
            if name == "row_of":
                grown[:] = -1
            elif name == "mass_of":
                grown[:] = K.MASS_UNDET
            elif name == "outclass_of":
                grown[:] = -1
            grown[: self.cap] = old
            setattr(self, name, grown)
        pool = np.full((self.pool.shape[0], new_cap), -1, np.int32)
        pool[:, : self.cap] = self.pool
        self.pool = pool
        self.cap = new_cap

    def intern(self, state) -> int:
        sid = self.index.get(state)
        if sid is not None:
            return sid
        sid = len(self.states)
        if sid >= self.cap:
            self._grow_ids()
        self.states.append(state)
        self.index[state] = sid
        spec = self.spec
        self.marker_of[sid] = spec.marker(state)
        self.outclass_of[sid] = output_class(spec, state)
        if self.supports_mass:
            em = spec.expected_mass(state)
            self.mass_of[sid] = K.MASS_UNDET if em is None else em
            interval = spec.mass_interval(state)
            if interval is not None:
                lo, hi, sign = interval
                self.mass_lo[sid] = lo
                self.mass_hi[sid] = hi
                self.mass_sign[sid] = sign
        return sid

    def _new_entry(self, kind, aout, bout, alt_a, alt_b, thresh, massrule, massrule2) -> int:
        e = self.num_entries
        if e >= self.ecap:
            new_ecap = self.ecap * 2
            for name in ("ent_kind", "ent_aout", "ent_bout", "ent_alt_aout",
                         "ent_alt_bout", "ent_thresh", "ent_massrule", "ent_massrule2"):
                old = getattr(self, name)
                grown = np.zeros(new_ecap, old.dtype)
                grown[: self.ecap] = old
                setattr(self, name, grown)
            self.ecap = new_ecap
        self.ent_kind[e] = kind
        self.ent_aout[e] = aout
        self.ent_bout[e] = bout
        self.ent_alt_aout[e] = alt_a
        self.ent_alt_bout[e] = alt_b
        self.ent_thresh[e] = thresh
        self.ent_massrule[e] = massrule
        self.ent_massrule2[e] = massrule2
        self.num_entries += 1
        return e

    def _ensure_row(self, a: int) -> int:
        r = self.row_of[a]
        if r >= 0:
            return r
        if self.rows >= self.pool.shape[0]:
            pool = np.full((self.pool.shape[0] * 2, self.cap), -1, np.int32)
            pool[: self.pool.shape[0]] = self.pool
            self.pool = pool
        r = self.rows
        self.rows += 1
        self.row_of[a] = r
        return r

    _RULE_CODES = {"det": K.M_DET, "keep": K.M_KEEP, "sum": K.M_SUM, "zero": K.M_ZERO}

    def _mass_rule_code(self, sa, sb, sa2, sb2) -> int:
        if not self.supports_mass:
            return 0
        ra, rb = self.spec.mass_rules(sa, sb, sa2, sb2)
        code = (self._RULE_CODES[ra] << 2) | self._RULE_CODES[rb]
        if ra == "det" and rb == "det":
            e = [self.spec.expected_mass(s) for s in (sa, sb, sa2, sb2)]
            if None not in e and e[0] + e[1] != e[2] + e[3]:
                raise EngineError(
                    f"transition does not conserve mass: {sa} + {sb} -> {sa2} + {sb2}")
        return code

    def fill_pair(self, a: int, b: int) -> None:
        sa = self.states[a]
        sb = self.states[b]
        out = self.spec.transition_outcomes(sa, sb)
        if isinstance(out, Randomized):
            if not 0.0 < out.probability < 1.0:
                raise EngineError(
                    f"Randomized probability must lie in (0,1); got {out.probability} "
                    f"for pair {sa!r}, {sb!r} (return a plain tuple for 0 or 1)")
            if out.fire == (sa, sb) and out.skip == (sa, sb):
                e = 0
            else:
                fa = self.intern(out.fire[0])
                fb = self.intern(out.fire[1])
                ka = self.intern(out.skip[0])
                kb = self.intern(out.skip[1])
                rule = self._mass_rule_code(sa, sb, out.fire[0], out.fire[1])
                rule2 = self._mass_rule_code(sa, sb, out.skip[0], out.skip[1])
                e = self._new_entry(K.K_BERN, fa, fb, ka, kb,
                                    _rng.bernoulli_threshold(out.probability), rule, rule2)
        else:
            if out == (sa, sb):
                e = 0
            else:
                oa = self.intern(out[0])
                ob = self.intern(out[1])
                rule = self._mass_rule_code(sa, sb, out[0], out[1])
                e = self._new_entry(K.K_DET, oa, ob, 0, 0, 0, rule, rule)
        r = self._ensure_row(a)
        self.pool[r, b] = e


# --------------------------------------------------------------------------
# Population

_SNAPBUF_SIZE = 1 << 20


class _AgentsView(Sequence):
    def __init__(self, pop: "Population"):
        self._pop = pop

    def __len__(self) -> int:
        return self._pop.n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._pop.state_of_agent(k) for k in range(*i.indices(self._pop.n))]
        return self._pop.state_of_agent(i)

    def __iter__(self) -> Iterator:
        for k in range(self._pop.n):
            yield self._pop.state_of_agent(k)


class Population:
    """n agents, an interaction counter, and a seeded random stream."""

    def __init__(self, spec: ProtocolSpec, inputs: Sequence[Any], seed: int,
                 table: Optional[TransitionTable] = None):
        n = len(inputs)
        if n < 2:
            raise EngineError("population too small: need at least 2 agents")
        if table is not None and table.spec is not spec:
            raise EngineError("shared table must belong to the same protocol instance")
        self.spec = spec
        self.table = table if table is not None else TransitionTable(spec)
        self.n = n
        self.seed = int(seed)
        self.rng = _rng.seed_state(seed)
        self.interactions = 0
        self.supports_mass = self.table.supports_mass

        mm = spec.max_marker()
        self._mcounts = np.zeros(mm + 1, np.int64)
        self._cum_ge = np.zeros(mm + 2, np.int64)
        self._cross_plus = np.full(mm + 1, -1, np.int64)
        self._cross_01 = np.full(mm + 1, -1, np.int64)
        self._cross_09 = np.full(mm + 1, -1, np.int64)
        self._cross_0001 = np.full(mm + 1, -1, np.int64)
        self._outcounts = np.zeros(3, np.int64)
        self._full_since = np.full(3, -1, np.int64)
        self._has_out = any(spec.output(spec.init(s)) is not None for s in set(inputs))

        self._regs = np.zeros(K.NUM_REGS, np.int64)
        self._regs[K.R_PEND_I] = -1
        self._regs[K.R_MISS_A] = -1
        self._regs[K.R_MASS_FIRST] = -1
        self._regs[K.R_CHECKED_VERSION] = -1
        self._snapbuf = np.zeros(0, np.int64)

        init_states = [spec.init(sym) for sym in inputs]
        self.ids = np.fromiter((self.table.intern(s) for s in init_states), np.int32, count=n)
        self._counts = np.zeros(self.table.cap, np.int64)
        self._ever = np.zeros(self.table.cap, np.int8)
        binc = np.bincount(self.ids, minlength=self.table.cap)
        self._counts[: len(binc)] += binc
        self._regs[K.R_D_NONZERO] = int(np.count_nonzero(self._counts))
        maxm = 0
        for sid in np.unique(self.ids):
            self._ever[sid] = 1
            c = int(self._counts[sid])
            m = int(self.table.marker_of[sid])
            maxm = max(maxm, m)
            self._mcounts[m] += c
            oc = int(self.table.outclass_of[sid])
            if oc >= 0:
                self._outcounts[oc] += c
        self._regs[K.R_MAXMARKER] = maxm
        for c in range(3):
            if self._outcounts[c] == n:
                self._full_since[c] = 0
        if self.supports_mass:
            self.masses = np.fromiter((spec.initial_mass(s) for s in init_states), np.int64, count=n)
        else:
            self.masses = np.zeros(n, np.int64)

    def _sync_cap(self) -> None:
        cap = self.table.cap
        if self._counts.shape[0] < cap:
            counts = np.zeros(cap, np.int64)
            counts[: self._counts.shape[0]] = self._counts
            self._counts = counts
            ever = np.zeros(cap, np.int8)
            ever[: self._ever.shape[0]] = self._ever
            self._ever = ever

    # -- public views ------------------------------------------------------

    @property
    def parallel_time(self) -> float:
        return self.interactions / self.n

    @property
    def agents(self) -> _AgentsView:
        return _AgentsView(self)

    def state_of(self, sid: int):
        return self.table.states[sid]

    def state_of_agent(self, i: int):
        return self.table.states[self.ids[i]]

    def state_counts(self) -> dict:
        out = {}
        for sid in range(len(self.table.states)):
            c = int(self._counts[sid])
            if c:
                out[self.table.states[sid]] = c
        return out

    def marker_counts(self) -> np.ndarray:
        return self._mcounts.copy()

    def max_marker_seen(self) -> int:
        return int(self._regs[K.R_MAXMARKER])

    def common_output(self) -> Optional[str]:
        if not self._has_out:
            return None
        for c in range(3):
            if self._outcounts[c] == self.n:
                return OUTPUT_SYMBOLS[c]
        return None

    # -- kernel driving ----------------------------------------------------

    def _kernel_args(self, guard, stop_at, pred, thresholds, flags):
        t = self.table
        pk, pv, pt = pred
        t01, t09, t0001 = thresholds
        has_out, has_mass, has_cross = flags
        return (
            self.ids, self.rng, self._regs, self._counts, self._ever,
            t.row_of, t.pool,
            t.ent_kind, t.ent_aout, t.ent_bout,
            t.ent_alt_aout, t.ent_alt_bout, t.ent_thresh,
            t.ent_massrule, t.ent_massrule2,
            t.marker_of, self._mcounts, t.outclass_of, self._outcounts, self._full_since,
            self.masses, t.mass_of, t.mass_lo, t.mass_hi, t.mass_sign,
            self._cum_ge, self._cross_plus, self._cross_01, self._cross_09, self._cross_0001,
            self._snapbuf,
            self.n, len(t.states), guard, stop_at, pk, pv, pt, t01, t09, t0001,
            has_out, has_mass, has_cross,
        )


def new_population(spec: ProtocolSpec, inputs: Sequence[Any], seed: int,
                   table: Optional[TransitionTable] = None) -> Population:
    """Build a population with agent i in state ``spec.init(inputs[i])``."""
    return Population(spec, inputs, seed, table=table)


def _resolve_predicate(spec: ProtocolSpec, name: str) -> tuple:
    preds = spec.predicates()
    if name not in preds:
        raise EngineError(f"unknown predicate {name!r}; protocol offers {sorted(preds)}")
    p: PredicateDef = preds[name]
    kind = _PRED_KINDS[p.kind]
    return kind, p.value, -1 if p.threshold is None else int(p.threshold)


def _predicate_holds(pop: Population, pred: tuple) -> bool:
    kind, value, thresh = pred
    if kind == 1:
        below = int(pop._mcounts[:value].sum()) if value > 0 else 0
        return below == 0
    if kind == 2:
        return pop.max_marker_seen() >= value
    if kind == 3:
        return int(pop._mcounts[value]) >= thresh
    if kind == 4:
        return int(pop._mcounts[value]) <= thresh
    return False


def is_silent(pop: Population) -> bool:
    """True iff no pair of present states (self-pairs only at count >= 2)
    can ever change state."""
    spec = pop.spec
    states = pop.table.states
    present = [sid for sid in range(len(states)) if pop._counts[sid] > 0]
    for x, sa in enumerate(present):
        for sb in present[x:]:
            if sa == sb and pop._counts[sa] < 2:
                continue
            if not spec.is_null(states[sa], states[sb]):
                return False
    return True


def _flush_snapbuf(pop: Population, sink: list) -> None:
    buf = pop._snapbuf
    end = int(pop._regs[K.R_SNAP_CUR])
    pos = 0
    while pos < end:
        inter = int(buf[pos])
        d = int(buf[pos + 1])
        pos += 2
        ids = buf[pos: pos + 2 * d: 2].astype(np.int32)
        cnts = buf[pos + 1: pos + 2 * d: 2].copy()
        pos += 2 * d
        if sink and sink[-1][0] == inter:
            sink[-1] = (inter, ids, cnts)  # forced + scheduled collapse
        else:
            sink.append((inter, ids, cnts))
    pop._regs[K.R_SNAP_CUR] = 0


def run_until(
    pop: Population,
    stop: StopCondition,
    guard: Union[int, MaxInteractions],
    *,
    snapshot_dt: float = 0.25,
    record_timeline: bool = True,
    record_crossings: bool = False,
) -> RunResult:
    """Run until ``stop`` or the guard fires; the guard is mandatory and its
    firing is reported in the result, not raised.

    Bounds are absolute: ``MaxParallelTime(t)`` stops once total parallel
    time reaches t, ``MaxInteractions(k)`` once total interactions reach k.
    Protocols with mass support are audited on every interaction; any
    violation is tallied in the result.
    """
    spec = pop.spec
    guard_n = guard.k if isinstance(guard, MaxInteractions) else int(guard)
    if guard_n <= 0:
        raise EngineError("guard must be positive")

    stop_at = -1
    pred = (0, 0, -1)
    silent_thr = -1
    if isinstance(stop, Silent):
        silent_thr = max(2 * pop.n, 1024)
    elif isinstance(stop, MaxParallelTime):
        stop_at = int(round(stop.t * pop.n))
    elif isinstance(stop, MaxInteractions):
        stop_at = stop.k
    elif isinstance(stop, Predicate):
        pred = _resolve_predicate(spec, stop.name)
        if pred[0] == 1:  # all_marker_ge tracks a live below-threshold count
            pop._regs[K.R_COUNT_BELOW] = int(pop._mcounts[: pred[1]].sum())
    else:
        raise EngineError(f"unsupported stop condition: {stop!r}")

    if record_timeline and pop._snapbuf.shape[0] == 0:
        pop._snapbuf = np.zeros(_SNAPBUF_SIZE, np.int64)
    regs = pop._regs
    regs[K.R_SNAP_EVERY] = max(1, int(round(snapshot_dt * pop.n))) if record_timeline else 0
    if not record_timeline:
        regs[K.R_FORCE_SNAP] = 0
    regs[K.R_NEXT_SNAP] = pop.interactions
    regs[K.R_SILENT_THRESHOLD] = silent_thr
    regs[K.R_INTERACTIONS] = pop.interactions

    thresholds = (-1, -1, -1)
    if record_crossings:
        thresholds = (
            int(np.ceil(0.1 * pop.n)),
            int(np.ceil(0.9 * pop.n)),
            int(np.ceil(0.001 * pop.n)),
        )
        if pop.interactions == 0:
            # levels already occupied at start count as crossed at t=0
            suffix = 0
            for v in range(int(pop._mcounts.shape[0]) - 1, -1, -1):
                suffix += int(pop._mcounts[v])
                pop._cum_ge[v] = suffix
                if suffix >= 1 and pop._cross_plus[v] < 0:
                    pop._cross_plus[v] = 0
                if suffix >= thresholds[0] and pop._cross_01[v] < 0:
                    pop._cross_01[v] = 0
                if suffix >= thresholds[1] and pop._cross_09[v] < 0:
                    pop._cross_09[v] = 0
                if suffix >= thresholds[2] and pop._cross_0001[v] < 0:
                    pop._cross_0001[v] = 0

    timeline: list = []
    stopped_by: StopCondition = stop
    hit_guard = False
    silent = False

    # stop conditions that already hold mean zero further interactions
    done = False
    if stop_at >= 0 and pop.interactions >= stop_at:
        done = True
    if isinstance(stop, Predicate) and _predicate_holds(pop, pred):
        done = True
    if isinstance(stop, Silent) and is_silent(pop):
        done, silent, stopped_by = True, True, Silent()
    if pop.interactions >= guard_n:
        done, hit_guard, stopped_by = True, True, MaxInteractions(guard_n)

    flags = (1 if pop._has_out else 0, 1 if pop.supports_mass else 0, 1 if record_crossings else 0)
    while not done:
        pop._sync_cap()
        status = K.run_kernel(*pop._kernel_args(guard_n, stop_at, pred, thresholds, flags))
        pop.interactions = int(regs[K.R_INTERACTIONS])
        if status == K.ST_MISS:
            pop.table.fill_pair(int(regs[K.R_MISS_A]), int(regs[K.R_MISS_B]))
        elif status == K.ST_SNAPBUF:
            _flush_snapbuf(pop, timeline)
        elif status == K.ST_CHECK_SILENT:
            if is_silent(pop):
                silent = True
                stopped_by = Silent()
                done = True
            else:
                regs[K.R_CHECKED_VERSION] = regs[K.R_VERSION]
        elif status == K.ST_GUARD:
            hit_guard = True
            stopped_by = MaxInteractions(guard_n)
            done = True
        elif status == K.ST_STOP_TIME:
            done = True
        elif status == K.ST_STOP_PRED:
            done = True
        else:  # pragma: no cover
            raise EngineError(f"unexpected kernel status {status}")

    pop.interactions = int(regs[K.R_INTERACTIONS])
    if record_timeline:
        _take_final_snapshot(pop, timeline)
    if not silent:
        silent = is_silent(pop)

    output = pop.common_output()
    stab = None
    if silent and output is not None:
        c = OUTPUT_SYMBOLS.index(output)
        stab = int(pop._full_since[c]) / pop.n

    crossings = None
    if record_crossings:
        crossings = CrossingData(
            plus=pop._cross_plus.copy(), q01=pop._cross_01.copy(),
            q09=pop._cross_09.copy(), q0001=pop._cross_0001.copy(), n=pop.n)

    return RunResult(
        population=pop,
        interactions=pop.interactions,
        parallel_time=pop.parallel_time,
        stopped_by=stopped_by,
        silent=silent,
        stabilization_time=stab,
        output=output,
        hit_guard=hit_guard,
        last_change_time=int(regs[K.R_LAST_CHANGE_AT]) / pop.n,
        raw_timeline=timeline,
        mass_violations=int(regs[K.R_MASS_VIOL]),
        first_mass_violation=(None if regs[K.R_MASS_FIRST] < 0 else int(regs[K.R_MASS_FIRST])),
        crossings=crossings,
    )


def _take_final_snapshot(pop: Population, timeline: list) -> None:
    _flush_snapbuf(pop, timeline)
    if timeline and timeline[-1][0] == pop.interactions:
        return
    present = np.nonzero(pop._counts[: len(pop.table.states)])[0].astype(np.int32)
    timeline.append((pop.interactions, present, pop._counts[present].copy()))


def step(pop: Population) -> InteractionRecord:
    """Execute exactly one interaction (the counter advances even when the
    drawn pair is null) and report it.

    The pair is pre-drawn from a copy of the RNG state so the record can
    include the pre-interaction states; the kernel then makes the identical
    draw, keeping the stream position in lockstep with :func:`run_until`.
    """
    peek = pop.rng.copy()
    pi, pj = _rng.rand_pair(peek, pop.n)
    before = (pop.state_of_agent(pi), pop.state_of_agent(pj))

    regs = pop._regs
    regs[K.R_SNAP_EVERY] = 0
    regs[K.R_FORCE_SNAP] = 0
    regs[K.R_SILENT_THRESHOLD] = -1
    regs[K.R_INTERACTIONS] = pop.interactions
    target = pop.interactions + 1
    flags = (1 if pop._has_out else 0, 1 if pop.supports_mass else 0, 0)
    while True:
        pop._sync_cap()
        status = K.run_kernel(*pop._kernel_args(target, -1, (0, 0, -1), (-1, -1, -1), flags))
        pop.interactions = int(regs[K.R_INTERACTIONS])
        if status == K.ST_MISS:
            pop.table.fill_pair(int(regs[K.R_MISS_A]), int(regs[K.R_MISS_B]))
            continue
        if status == K.ST_GUARD:
            break
        raise EngineError(f"unexpected kernel status {status} in step()")  # pragma: no cover
    i = int(regs[K.R_LAST_I])
    j = int(regs[K.R_LAST_J])
    assert (i, j) == (pi, pj), "kernel draw diverged from peeked draw"
    changed = bool(regs[K.R_LAST_CHANGED])
    after = (pop.state_of_agent(i), pop.state_of_agent(j))
    return InteractionRecord(i=i, j=j, before=before, after=after, changed=changed)
