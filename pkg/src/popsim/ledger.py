"""Exact per-agent mass accounting for majority runs (test instrumentation).

The ledger shadows a run with arbitrary-precision rationals: every agent
carries a signed dyadic mass, the population-wide sum must equal the
initial gap after every single interaction, and each agent's mass must
match what its state claims to represent.  This is deliberately a second,
independent implementation of the bias arithmetic (the engine kernel has
its own 64-bit fixed-point audit); disagreements between the two mean a
transition is wrong.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .engine import InteractionRecord, Population
from .majority import AgentState, MAIN


class LedgerError(AssertionError):
    pass


def represented_mass(s: AgentState) -> Optional[Fraction]:
    """Mass a state claims to hold, or None when it is history-dependent
    (full agents) or abandoned (backup phase)."""
    if s.phase >= 10:
        return None
    if s.phase <= 2:
        return Fraction(s.bias)
    if s.opinion == 0:
        return Fraction(0)
    if s.full:
        return None
    return Fraction(s.opinion) * Fraction(1, 2 ** (-s.exponent))


def full_interval(s: AgentState) -> Optional[tuple]:
    """[lo, hi) bound on |mass| for a full agent, else None."""
    if s.phase >= 10 or not s.full or s.opinion == 0:
        return None
    hi = Fraction(1, 2 ** (-s.exponent))
    return (hi / 2, hi)


@dataclass
class MassLedger:
    """Signed exact mass per agent plus the conserved gap."""

    masses: list
    gap: int
    violations: list = field(default_factory=list)

    @classmethod
    def from_population(cls, pop: Population) -> "MassLedger":
        masses = []
        gap = 0
        for s in pop.agents:
            if s.phase != 0 or s.bias not in (-1, 1):
                raise LedgerError("ledger must start from a fresh phase-0 population")
            masses.append(Fraction(s.bias))
            gap += s.bias
        return cls(masses=masses, gap=gap)

    def total(self) -> Fraction:
        return sum(self.masses, Fraction(0))

    def apply(self, record: InteractionRecord, interaction_index: int) -> None:
        ledger_apply(self, record, interaction_index)

    def check_population(self, pop: Population, interaction_index: int) -> None:
        """Representation soundness of every agent plus the gap-sum."""
        for agent_index, s in enumerate(pop.agents):
            self._check_agent(s, agent_index, interaction_index)
        if self.total() != self.gap:
            self.violations.append(
                (interaction_index, f"gap sum {self.total()} != {self.gap}"))

    def _check_agent(self, s: AgentState, agent_index: int, interaction_index: int) -> None:
        rep = represented_mass(s)
        m = self.masses[agent_index]
        if rep is not None:
            if m != rep:
                self.violations.append(
                    (interaction_index,
                     f"agent {agent_index}: mass {m} != represented {rep} in {s}"))
            return
        interval = full_interval(s)
        if interval is not None:
            lo, hi = interval
            v = m * s.opinion
            if not (lo <= v < hi):
                self.violations.append(
                    (interaction_index,
                     f"agent {agent_index}: |mass| {abs(m)} outside [{lo}, {hi}) in {s}"))

    def raise_on_violation(self) -> None:
        if self.violations:
            idx, msg = self.violations[0]
            raise LedgerError(f"first violation at interaction {idx}: {msg}")


def ledger_apply(ledger: MassLedger, record: InteractionRecord, interaction_index: int) -> None:
    """Advance the ledger through one recorded interaction.

    Mass moves: when the new state represents an exact mass, that is the
    agent's new ledger mass; a consumption (full flag turned on) transfers
    the partner's entire exact mass into the consumer; everything else
    (backup freeze, full agents drifting through phases) keeps masses.
    """
    if not record.changed:
        return
    (a, b) = record.before
    (a2, b2) = record.after
    i, j = record.i, record.j
    old_i, old_j = ledger.masses[i], ledger.masses[j]

    def new_mass(old_state, new_state, own, other):
        rep = represented_mass(new_state)
        if rep is not None:
            return rep
        if new_state.full and not old_state.full:
            return own + other  # consumption absorbs the partner's mass
        return own

    ledger.masses[i] = new_mass(a, a2, old_i, old_j)
    ledger.masses[j] = new_mass(b, b2, old_j, old_i)

    if ledger.masses[i] + ledger.masses[j] != old_i + old_j:
        ledger.violations.append(
            (interaction_index,
             f"interaction {a}+{b} -> {a2}+{b2} moved net mass "
             f"{ledger.masses[i] + ledger.masses[j] - old_i - old_j}"))
    ledger._check_agent(a2, i, interaction_index)
    ledger._check_agent(b2, j, interaction_index)
