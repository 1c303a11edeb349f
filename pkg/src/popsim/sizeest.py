"""Stable floor(log2 n) computation.

Everyone starts as a level-0 climber; two climbers at the same level merge
(one promotes, the other becomes a follower one level up) and followers
propagate their maximum.  Climber levels conserve sum(2**level) == n
exactly, so the silent configuration encodes n in binary: one climber per
1-bit of n, and every follower carries floor(log2 n).

The engine's mass audit enforces the conservation law on every single
interaction (mass of a level-i climber is 2**i, followers weigh nothing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from . import engine
from .protocol import ProtocolSpec

LEVEL_CAP = 64  # n < 2**64


class SizeEstState(NamedTuple):
    kind: str  # 'L' climber / 'F' follower
    value: int


class SizeEstSpec(ProtocolSpec):
    name = "sizeest"
    supports_mass = True

    def init(self, symbol) -> SizeEstState:
        return SizeEstState(kind="L", value=0)

    def transition_outcomes(self, u: SizeEstState, v: SizeEstState):
        if u.kind == "L" and v.kind == "L" and u.value == v.value:
            return (SizeEstState("L", u.value + 1), SizeEstState("F", u.value + 1))
        if u.kind == "F" and v.kind == "F" and u.value != v.value:
            m = max(u.value, v.value)
            return (SizeEstState("F", m), SizeEstState("F", m))
        return u, v

    def marker(self, s: SizeEstState) -> int:
        return s.value

    def max_marker(self) -> int:
        return LEVEL_CAP

    def fields(self, s: SizeEstState) -> dict:
        return {"kind": s.kind, "value": s.value}

    # exact conservation: climbers carry 2**value, followers nothing
    def initial_mass(self, s: SizeEstState) -> int:
        return 1

    def expected_mass(self, s: SizeEstState) -> Optional[int]:
        return (1 << s.value) if s.kind == "L" else 0

    def mass_interval(self, s: SizeEstState):
        return None

    def mass_rules(self, a, b, a2, b2):
        return ("det", "det")


@dataclass
class SizeEstReport:
    n: int
    l_levels: list
    f_value: Optional[int]
    silence_time: float
    ok: bool
    expected_levels: list
    mass_violations: int
    counts: dict

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "l_levels": self.l_levels,
            "f_value": self.f_value,
            "silence_time": self.silence_time,
            "ok": self.ok,
        }, indent=2)


def one_bits(n: int) -> list:
    """Positions of the 1-bits of n, ascending."""
    return [i for i in range(n.bit_length()) if (n >> i) & 1]


def sizeest_check(pop: engine.Population, n: int, silence_time: float,
                  mass_violations: int = 0) -> SizeEstReport:
    """Verify a silent configuration: climber levels must be exactly the
    1-bit positions of n (one agent each) and every follower must carry
    floor(log2 n)."""
    counts = pop.state_counts()
    levels = sorted(s.value for s in counts for _ in range(counts[s]) if s.kind == "L")
    f_values = {s.value for s in counts if s.kind == "F"}
    expected = one_bits(n)
    f_target = int(math.floor(math.log2(n)))
    ok = (
        levels == expected
        and (f_values == {f_target} or (not f_values and n == 1))
        and mass_violations == 0
    )
    return SizeEstReport(
        n=n,
        l_levels=levels,
        f_value=(next(iter(f_values)) if len(f_values) == 1 else None),
        silence_time=silence_time,
        ok=ok,
        expected_levels=expected,
        mass_violations=mass_violations,
        counts={f"{s.kind}{s.value}": c for s, c in sorted(counts.items())},
    )


def run_sizeest(n: int, seed: int, guard: Optional[int] = None,
                table: Optional[engine.TransitionTable] = None,
                spec: Optional[SizeEstSpec] = None) -> SizeEstReport:
    """One full run to silence plus the binary-encoding check."""
    spec = spec or SizeEstSpec()
    pop = engine.new_population(spec, [0] * n, seed=seed, table=table)
    # expected silence time is Theta(n log n) parallel; leave generous room
    g = guard if guard is not None else int(60 * n * n * max(1, math.ceil(math.log2(n))))
    res = engine.run_until(pop, engine.Silent(), guard=g, record_timeline=False)
    if not res.silent:
        raise engine.EngineError(f"size estimation did not reach silence within guard {g}")
    return sizeest_check(pop, n, res.last_change_time, res.mass_violations)
