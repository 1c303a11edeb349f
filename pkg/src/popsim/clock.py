"""Standalone fixed-resolution phase clock.

Two reactions on a ``minute`` field in {0..kL}: unequal minutes jump to the
max (epidemic), equal minutes below the ceiling promote one agent with
probability p (drip).  ``measure_minutes`` runs the clock on a full
population and extracts threshold-crossing times per minute; the mean-field
integrator reproduces the large-n minute distribution that a stochastic run
cannot reach.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from . import engine
from .protocol import ProtocolSpec, Randomized


class ClockState(NamedTuple):
    minute: int


class ClockSpec(ProtocolSpec):
    """Drip + epidemic minute dynamics; no phase counter in the standalone
    variant, so the top minute is absorbing."""

    name = "clock"

    def __init__(self, p: float, k: int, L: int):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be in [0, 1] (p=0 disables drips)")
        if k < 1 or L < 1:
            raise ValueError("k and L must be >= 1")
        self.p = p
        self.k = k
        self.L = L
        self.max_minute = k * L

    def init(self, symbol) -> ClockState:
        return ClockState(minute=int(symbol))

    def transition_outcomes(self, u: ClockState, v: ClockState):
        if u.minute != v.minute:
            m = max(u.minute, v.minute)
            return ClockState(m), ClockState(m)
        if u.minute < self.max_minute and self.p > 0.0:
            fired = (ClockState(u.minute + 1), v)
            if self.p == 1.0:
                return fired
            return Randomized(self.p, fire=fired, skip=(u, v))
        return u, v

    def marker(self, s: ClockState) -> int:
        return s.minute

    def max_marker(self) -> int:
        return self.max_minute

    def fields(self, s: ClockState) -> dict:
        return {"minute": s.minute, "hour": s.minute // self.k}


@dataclass
class MinuteStats:
    """Crossing times and sampled minute lengths for one clock run.

    ``t_plus[i]``, ``t01[i]``, ``t09[i]`` are the first parallel times with
    count(minute >= i) reaching 1, 10% and 90% of the population (NaN if
    never reached); ``minute_lengths`` holds t01[i+1] - t01[i] for i in the
    requested window.
    """

    n: int
    p: float
    k: int
    L: int
    window: tuple
    t_plus: np.ndarray
    t01: np.ndarray
    t09: np.ndarray
    t0001: np.ndarray
    minute_lengths: list
    complete: bool
    distribution: list = field(default_factory=list)  # (parallel_time, fractions[kL+1])

    def fraction_at_least(self, minute: int, snapshot_index: int) -> float:
        _, frac = self.distribution[snapshot_index]
        return float(frac[minute:].sum())


def measure_minutes(
    n: int,
    p: float,
    k: int,
    L: int,
    window: tuple = (9, 18),
    seed: int = 0,
    snapshot_dt: float = 0.01,
    record_distribution: bool = True,
    time_budget: Optional[float] = None,
) -> MinuteStats:
    """Run the clock on a full population of n agents from minute 0 and
    measure crossing times for minutes up to window[1] + 1.

    The time budget defaults to the proven per-minute upper bound
    2.11 + ln(1/p)/2 with headroom; if the window is not reached within it,
    the stats are flagged incomplete.
    """
    i0, i1 = window
    spec = ClockSpec(p=p, k=k, L=L)
    if i1 + 1 > spec.max_minute:
        raise ValueError(f"window end {i1} needs minute {i1 + 1} <= kL = {spec.max_minute}")
    pop = engine.new_population(spec, [0] * n, seed=seed)
    per_minute = 2.11 + 0.5 * math.log(1.0 / p)
    budget = time_budget if time_budget is not None else (i1 + 2) * per_minute + 10.0
    res = engine.run_until(
        pop, engine.MaxParallelTime(budget), guard=int(budget * n) + n,
        snapshot_dt=snapshot_dt, record_timeline=record_distribution,
        record_crossings=True)

    cr = res.crossings
    mm = spec.max_minute

    def times(arr):
        out = np.full(mm + 1, np.nan)
        got = arr[: mm + 1]
        mask = got >= 0
        out[mask] = got[mask] / n
        return out

    t_plus, t01, t09, t0001 = (times(cr.plus), times(cr.q01), times(cr.q09), times(cr.q0001))
    lengths = []
    complete = True
    for i in range(i0, i1 + 1):
        if math.isnan(t01[i]) or math.isnan(t01[i + 1]):
            complete = False
            continue
        lengths.append(float(t01[i + 1] - t01[i]))

    distribution = []
    if record_distribution:
        for inter, ids, cnts in res.raw_timeline:
            frac = np.zeros(mm + 1)
            for sid, c in zip(ids, cnts):
                frac[pop.state_of(int(sid)).minute] += c
            distribution.append((inter / n, frac / n))

    return MinuteStats(
        n=n, p=p, k=k, L=L, window=(i0, i1),
        t_plus=t_plus, t01=t01, t09=t09, t0001=t0001,
        minute_lengths=lengths, complete=complete, distribution=distribution)


def hour_projection(stats_or_minute: Union[MinuteStats, ClockState, int], k: Optional[int] = None):
    """Hour of a minute value (floor division), or the synchronous-hour
    intervals [start_h, end_h] of a measured run.

    start_h = first time >= 90% of agents have hour >= h;
    end_h   = first time > 0.1% of agents are beyond hour h.
    Intervals may be empty (end_h < start_h) or right-open (NaN end).
    """
    if isinstance(stats_or_minute, MinuteStats):
        stats = stats_or_minute
        hours = []
        for h in range(stats.L + 1):
            start = stats.t09[h * stats.k]
            nxt = (h + 1) * stats.k
            end = stats.t0001[nxt] if nxt <= stats.k * stats.L else math.nan
            hours.append((h, float(start), float(end)))
        return hours
    minute = stats_or_minute.minute if isinstance(stats_or_minute, ClockState) else int(stats_or_minute)
    if k is None:
        raise ValueError("k is required to project a bare minute")
    return minute // k


# --------------------------------------------------------------------------
# Mean-field surrogate for very large populations


@dataclass
class MeanFieldState:
    f: np.ndarray  # fraction of agents per minute, sums to 1
    t: float
    dt: float


def meanfield_init(k: int, L: int, dt: float = 0.001) -> MeanFieldState:
    if dt > 0.01:
        raise ValueError("dt must be <= 0.01 for a stable explicit step")
    f = np.zeros(k * L + 1)
    f[0] = 1.0
    return MeanFieldState(f=f, t=0.0, dt=dt)


def _meanfield_rhs(f: np.ndarray, p: float) -> np.ndarray:
    # drip flux p*f_i^2 feeds minute i+1; epidemic drags mass up to the max
    drip_out = p * f * f
    drip_out[-1] = 0.0
    drip_in = np.zeros_like(f)
    drip_in[1:] = p * f[:-1] * f[:-1]
    total = f.sum()
    above = total - np.cumsum(f)            # sum of f_j for j > i
    below = np.cumsum(f) - f                # sum of f_j for j < i
    return drip_in - drip_out - 2.0 * f * above + 2.0 * f * below


def meanfield_step(s: MeanFieldState, p: float) -> MeanFieldState:
    """One explicit Euler step of the minute-fraction flow; retries once at
    half step size if a fraction would go negative."""
    for attempt, dt in enumerate((s.dt, s.dt / 2)):
        f = s.f + dt * _meanfield_rhs(s.f, p)
        if (f >= 0).all():
            f /= f.sum()
            return MeanFieldState(f=f, t=s.t + dt, dt=s.dt)
    raise ArithmeticError("integration unstable")


def meanfield_run(p: float, k: int, L: int, t_end: float, dt: float = 0.001,
                  sample_times: Optional[Sequence[float]] = None):
    """Integrate to t_end; returns (final state, samples at the requested
    times), sampling the first step at or past each requested time."""
    s = meanfield_init(k, L, dt)
    want = sorted(sample_times) if sample_times else []
    got = []
    wi = 0
    while s.t < t_end - 1e-12:
        s = meanfield_step(s, p)
        while wi < len(want) and s.t >= want[wi] - 1e-12:
            got.append((s.t, s.f.copy()))
            wi += 1
    return s, got


# --------------------------------------------------------------------------
# CSV exports


def write_minutes_csv(stats: MinuteStats, path) -> None:
    """columns: parallel_time, minute, fraction (zero rows omitted)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["parallel_time", "minute", "fraction"])
        for t, frac in stats.distribution:
            for minute, val in enumerate(frac):
                if val > 0:
                    w.writerow([f"{t:.6f}", minute, f"{val:.9f}"])


def write_crossings_csv(stats: MinuteStats, path) -> None:
    """columns: minute, t_plus, t_01, t_09 (blank when never crossed)."""

    def cell(x):
        return "" if math.isnan(x) else f"{x:.6f}"

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["minute", "t_plus", "t_01", "t_09"])
        for m in range(len(stats.t01)):
            w.writerow([m, cell(stats.t_plus[m]), cell(stats.t01[m]), cell(stats.t09[m])])
