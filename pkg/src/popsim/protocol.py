"""Protocol contract executed by the engine.

A protocol is a pure description: how an agent state is built from an
input symbol, and what an interacting pair turns into.  All scheduling,
randomness and bookkeeping live in the engine.

``transition_outcomes(a, b)`` returns either a plain ``(a2, b2)`` tuple
(deterministic) or a :class:`Randomized` describing one Bernoulli branch.
A protocol must return a plain tuple whenever the branch probability is 1,
so that the deterministic variant consumes no random draws and replay
streams line up with the p=1 case.

States are ordinary hashable values (NamedTuples throughout this package).
Transitions must be pure and symmetric up to argument order: swapping the
arguments may swap which agent receives which outcome, but the outcome
multiset must not change (``check_swap_symmetry`` asserts this on demand).
"""

from __future__ import annotations

from typing import Any, Callable, Hashable, NamedTuple, Optional, Sequence

State = Hashable

OUTPUT_SYMBOLS = ("A", "B", "T")


class Randomized(NamedTuple):
    """One Bernoulli branch: with ``probability`` the pair becomes ``fire``,
    otherwise ``skip``.  Exactly one random draw is consumed either way."""

    probability: float
    fire: tuple
    skip: tuple


class PredicateDef(NamedTuple):
    """A named stop predicate over the protocol's marker counts.

    kind:
      - "all_marker_ge":  every agent's marker >= value
      - "any_marker_ge":  some agent's marker >= value
      - "count_ge":       number of agents with marker == value >= threshold
      - "count_le":       number of agents with marker == value <= threshold
    ``threshold`` may be None for the first two kinds.
    """

    kind: str
    value: int
    threshold: Optional[int] = None


class ProtocolSpec:
    """Base class for protocols; subclasses override the core three methods."""

    name: str = "protocol"

    def init(self, symbol: Any) -> State:
        raise NotImplementedError

    def transition_outcomes(self, a: State, b: State):
        """Return ``(a2, b2)`` or :class:`Randomized` for the pair (a, b)."""
        raise NotImplementedError

    # -- derived behavior ------------------------------------------------

    def transition(self, a: State, b: State, rng) -> tuple:
        """Apply one interaction, consuming randomness from ``rng`` only
        when the outcome is genuinely probabilistic."""
        from . import rng as _rng

        out = self.transition_outcomes(a, b)
        if isinstance(out, Randomized):
            thresh = _rng.bernoulli_threshold(out.probability)
            return out.fire if _rng.bernoulli(rng, thresh) else out.skip
        return out

    def is_null(self, a: State, b: State) -> bool:
        """True iff the pair (a, b) returns (a, b) with probability 1."""
        out = self.transition_outcomes(a, b)
        if isinstance(out, Randomized):
            return out.fire == (a, b) and out.skip == (a, b)
        return out == (a, b)

    # -- optional hooks used by the engine's bookkeeping ------------------

    def marker(self, state: State) -> int:
        """Small nonnegative int used for stop predicates and count curves
        (e.g. phase for the majority protocol, minute for the clock)."""
        return 0

    def max_marker(self) -> int:
        """Upper bound (inclusive) on marker values."""
        return 0

    def output(self, state: State) -> Optional[str]:
        """Consensus output symbol of this state ('A'/'B'/'T'), or None if
        the protocol has no output notion."""
        return None

    def fields(self, state: State) -> dict:
        """Projection view of a state, used for snapshots and CSV keys."""
        return state._asdict() if hasattr(state, "_asdict") else {"state": state}

    def predicates(self) -> dict[str, PredicateDef]:
        """Named stop predicates this protocol supports."""
        return {}

    def order_sensitive(self, a: State, b: State) -> bool:
        """True for pairs whose rule uses argument order as a fair
        tie-break (e.g. which of two equal-role agents takes which new
        role).  The engine draws ordered pairs uniformly, so each
        orientation occurs with probability 1/2; registering a pair here
        documents the asymmetry and exempts it from the strict swap check.
        """
        return False


def output_class(spec: ProtocolSpec, state: State) -> int:
    """Output symbol as a small int (-1 when the protocol has no output)."""
    sym = spec.output(state)
    return -1 if sym is None else OUTPUT_SYMBOLS.index(sym)


def check_swap_symmetry(spec: ProtocolSpec, a: State, b: State) -> None:
    """Assert transition(a,b) and swap(transition(b,a)) agree as outcome
    multisets, except for registered positional tie-breaks.

    Randomized outcomes must match branch-for-branch (same probability,
    swapped outcome multisets), otherwise replay would depend on draw
    order."""
    if spec.order_sensitive(a, b) or spec.order_sensitive(b, a):
        return
    fwd = spec.transition_outcomes(a, b)
    rev = spec.transition_outcomes(b, a)
    if isinstance(fwd, Randomized) != isinstance(rev, Randomized):
        raise AssertionError(f"asymmetric branch structure for {a!r}, {b!r}")
    if isinstance(fwd, Randomized):
        if fwd.probability != rev.probability:
            raise AssertionError(f"asymmetric probability for {a!r}, {b!r}")
        for mine, theirs in ((fwd.fire, rev.fire), (fwd.skip, rev.skip)):
            if sorted(map(repr, mine)) != sorted(map(repr, theirs)):
                raise AssertionError(f"asymmetric outcome for {a!r}, {b!r}: {mine} vs {theirs}")
    else:
        if sorted(map(repr, fwd)) != sorted(map(repr, rev)):
            raise AssertionError(f"asymmetric outcome for {a!r}, {b!r}: {fwd} vs {rev}")
