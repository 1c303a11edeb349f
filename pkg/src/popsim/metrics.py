"""Trajectory projections and the statistical experiments that check the
closed-form timing predictions (epidemic spread, two-sided and one-sided
cancellation).

Each experiment runs a dedicated micro-protocol and compares the sampled
mean against the prediction derived from summing the geometric waiting
times (the integral form); the predictions here are the oracles the
acceptance suite pins its expected values to.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import engine
from .protocol import PredicateDef, ProtocolSpec
from .rng import spawn_seed


# --------------------------------------------------------------------------
# Snapshots and timelines


@dataclass(frozen=True)
class Snapshot:
    parallel_time: float
    counts: dict  # projected field tuple -> count

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class Timeline:
    snapshots: list
    projection: tuple
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.snapshots)

    def __len__(self):
        return len(self.snapshots)


def project_timeline(result: engine.RunResult, fields: Sequence[str],
                     meta: Optional[dict] = None) -> Timeline:
    """Aggregate the raw per-state timeline onto a tuple of state fields."""
    pop = result.population
    spec = pop.spec
    fields = tuple(fields)
    key_of: dict = {}
    snaps = []
    for inter, ids, cnts in result.raw_timeline:
        agg: dict = {}
        for sid, c in zip(ids, cnts):
            sid = int(sid)
            key = key_of.get(sid)
            if key is None:
                fv = spec.fields(pop.state_of(sid))
                try:
                    key = tuple(fv[f] for f in fields)
                except KeyError as exc:
                    raise KeyError(f"unknown projection field {exc}; "
                                   f"available: {sorted(fv)}") from None
                key_of[sid] = key
            agg[key] = agg.get(key, 0) + int(c)
        snaps.append(Snapshot(parallel_time=inter / pop.n, counts=agg))
    return Timeline(snapshots=snaps, projection=fields, meta=meta or {})


def write_timeline_csv(timeline: Timeline, path) -> None:
    """columns: parallel_time, key ('|'-joined projected fields), count."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["parallel_time", "key", "count"])
        for snap in timeline.snapshots:
            for key in sorted(snap.counts, key=repr):
                joined = "|".join(str(x) for x in key)
                w.writerow([f"{snap.parallel_time:.6f}", joined, snap.counts[key]])


def stabilization_time(result: engine.RunResult) -> Optional[float]:
    """Earliest parallel time after which every agent already holds the
    final common output (exact interaction resolution, tracked in-run).
    Absent unless the run ended silent with a consensus."""
    return result.stabilization_time


def snapshot_stabilization_bound(timeline: Timeline, final_output: str) -> Optional[float]:
    """Snapshot-granularity upper bound on the stabilization time: the time
    of the first snapshot from which every later snapshot is unanimously
    ``final_output``.  Projection must include the 'output' field."""
    if "output" not in timeline.projection:
        raise ValueError("timeline projection must include 'output'")
    pos = timeline.projection.index("output")
    bound = None
    for snap in timeline.snapshots:
        unanimous = all(key[pos] == final_output for key in snap.counts)
        if unanimous and bound is None:
            bound = snap.parallel_time
        elif not unanimous:
            bound = None
    return bound


# --------------------------------------------------------------------------
# Micro-protocols for the timing experiments


class EpidemicSpec(ProtocolSpec):
    """i,s -> i,i : larger state overwrites on contact."""

    name = "epidemic"

    def init(self, symbol) -> str:
        if symbol not in ("S", "I"):
            raise ValueError(f"epidemic input must be 'S' or 'I', got {symbol!r}")
        return symbol

    def transition_outcomes(self, a, b):
        if {a, b} == {"S", "I"}:
            return ("I", "I")
        return a, b

    def marker(self, s) -> int:
        return 1 if s == "I" else 0

    def max_marker(self) -> int:
        return 1

    def fields(self, s) -> dict:
        return {"state": s}

    def predicates(self) -> dict:
        return {"infected_ge": PredicateDef("count_ge", 1, None)}


class CancelSpec(ProtocolSpec):
    """a,b -> 0,0 : opposite agents annihilate into a dead state."""

    name = "cancel"
    MARKERS = {"D": 0, "A": 1, "B": 2}

    def init(self, symbol) -> str:
        if symbol not in ("A", "B", "D"):
            raise ValueError(f"cancel input must be 'A', 'B' or 'D', got {symbol!r}")
        return symbol

    def transition_outcomes(self, a, b):
        if {a, b} == {"A", "B"}:
            return ("D", "D")
        return a, b

    def marker(self, s) -> int:
        return self.MARKERS[s]

    def max_marker(self) -> int:
        return 2

    def fields(self, s) -> dict:
        return {"state": s}


class OneSidedCancelSpec(ProtocolSpec):
    """a,b -> a,0 : contact with A forces a B agent out."""

    name = "one_sided_cancel"
    MARKERS = {"D": 0, "A": 1, "B": 2}

    def init(self, symbol) -> str:
        if symbol not in ("A", "B", "D"):
            raise ValueError(f"input must be 'A', 'B' or 'D', got {symbol!r}")
        return symbol

    def transition_outcomes(self, a, b):
        if {a, b} == {"A", "B"}:
            return ("A", "D")
        return a, b

    def marker(self, s) -> int:
        return self.MARKERS[s]

    def max_marker(self) -> int:
        return 2

    def fields(self, s) -> dict:
        return {"state": s}


# --------------------------------------------------------------------------
# Closed-form predictions (the oracles)


def epidemic_prediction(a: float, b: float) -> float:
    """Expected parallel time for the infected fraction to grow a -> b."""
    return 0.5 * (math.log(b) - math.log(1 - b) - math.log(a) + math.log(1 - a))


def cancel_prediction(a: float, b: float, d: float, n: int) -> float:
    """Expected parallel time for d*n annihilations starting from fractions
    a > b of opposite agents."""
    return (math.log(b) - math.log(a)
            - math.log(b - d + 1 / n) + math.log(a - d + 1 / n)) / (2 * (a - b))


def one_sided_prediction(a: float, b1: float, b2: float) -> float:
    """Expected parallel time for the B fraction to shrink b1 -> b2 against
    a maintained A fraction a."""
    return (math.log(b1) - math.log(b2)) / (2 * a)


# --------------------------------------------------------------------------
# Experiment runners


@dataclass
class ExperimentResult:
    name: str
    params: dict
    samples: list
    prediction: float
    tolerance: float
    passed: bool

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def relative_error(self) -> float:
        return abs(self.mean - self.prediction) / abs(self.prediction)

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "params": self.params,
            "samples": self.samples,
            "prediction": self.prediction,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }, indent=2)


def _verdict(name, params, samples, prediction, tolerance) -> ExperimentResult:
    mean = float(np.mean(samples))
    passed = abs(mean - prediction) <= tolerance * abs(prediction)
    return ExperimentResult(name=name, params=params, samples=list(samples),
                            prediction=prediction, tolerance=tolerance, passed=passed)


def _map_trials(fn: Callable, args_list: list, jobs: int) -> list:
    """Run trials, possibly across processes; results in submission order so
    the reduction is deterministic regardless of scheduling."""
    if jobs <= 1:
        return [fn(args) for args in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args_list))


def epidemic_experiment(n: int, from_fraction: float, to_fraction: float,
                        trials: int = 20, seed: int = 0, tolerance: float = 0.03,
                        jobs: int = 1) -> ExperimentResult:
    """Grow an epidemic from ceil(a*n) infected until the count reaches
    ceil(b*n); compare the mean time against the waiting-time integral."""
    a, b = from_fraction, to_fraction
    if not 0 < a < b < 1:
        raise ValueError("need 0 < a < b < 1")
    args = [(n, a, b, spawn_seed(seed, t)) for t in range(trials)]
    samples = _map_trials(_epidemic_trial_threshold, args, jobs)
    return _verdict("epidemic", {"n": n, "a": a, "b": b, "trials": trials, "seed": seed},
                    samples, epidemic_prediction(a, b), tolerance)


class _ThresholdEpidemic(EpidemicSpec):
    def __init__(self, threshold: int):
        self.threshold = threshold

    def predicates(self) -> dict:
        return {"infected_ge": PredicateDef("count_ge", 1, self.threshold)}


def _epidemic_trial_threshold(args) -> float:
    n, a, b, seed = args
    spec = _ThresholdEpidemic(math.ceil(b * n))
    n_inf = math.ceil(a * n)
    pop = engine.new_population(spec, ["I"] * n_inf + ["S"] * (n - n_inf), seed=seed)
    res = engine.run_until(pop, engine.Predicate("infected_ge"),
                           guard=int(100 * n * math.log(n + 1)) + n,
                           record_timeline=False)
    if res.hit_guard:
        raise engine.EngineError("epidemic failed to reach the target fraction")
    return res.parallel_time


class _ThresholdCancel(CancelSpec):
    def __init__(self, threshold: int):
        self.threshold = threshold

    def predicates(self) -> dict:
        return {"b_le": PredicateDef("count_le", self.MARKERS["B"], self.threshold)}


class _ThresholdOneSided(OneSidedCancelSpec):
    def __init__(self, threshold: int):
        self.threshold = threshold

    def predicates(self) -> dict:
        return {"b_le": PredicateDef("count_le", self.MARKERS["B"], self.threshold)}


def _cancel_trial(args) -> float:
    n, a, b, d, seed = args
    na, nb, nd = round(a * n), round(b * n), round(d * n)
    spec = _ThresholdCancel(nb - nd)
    inputs = ["A"] * na + ["B"] * nb + ["D"] * (n - na - nb)
    pop = engine.new_population(spec, inputs, seed=seed)
    res = engine.run_until(pop, engine.Predicate("b_le"),
                           guard=int(100 * n * math.log(n + 1)) + n,
                           record_timeline=False)
    if res.hit_guard:
        raise engine.EngineError("cancel process failed to reach the target count")
    return res.parallel_time


def cancel_experiment(n: int, a: float, b: float, d: float, trials: int = 20,
                      seed: int = 0, tolerance: float = 0.05, jobs: int = 1) -> ExperimentResult:
    """Annihilate opposite agents until d*n pairs have cancelled; compare
    against the two-sided waiting-time integral."""
    if not 0 < d <= b < a < 1:
        raise ValueError("need 0 < d <= b < a < 1")
    if a + b > 1:
        raise ValueError("fractions a + b must fit in one population")
    args = [(n, a, b, d, spawn_seed(seed, t)) for t in range(trials)]
    samples = _map_trials(_cancel_trial, args, jobs)
    return _verdict("cancel", {"n": n, "a": a, "b": b, "d": d, "trials": trials, "seed": seed},
                    samples, cancel_prediction(a, b, d, n), tolerance)


def _one_sided_trial(args) -> float:
    n, a, b1, b2, seed = args
    na, nb = round(a * n), round(b1 * n)
    spec = _ThresholdOneSided(round(b2 * n))
    inputs = ["A"] * na + ["B"] * nb + ["D"] * (n - na - nb)
    pop = engine.new_population(spec, inputs, seed=seed)
    res = engine.run_until(pop, engine.Predicate("b_le"),
                           guard=int(100 * n * math.log(n + 1)) + n,
                           record_timeline=False)
    if res.hit_guard:
        raise engine.EngineError("one-sided cancel failed to reach the target count")
    return res.parallel_time


def one_sided_cancel_experiment(n: int, a: float, b1: float, b2: float, trials: int = 20,
                                seed: int = 0, tolerance: float = 0.05,
                                jobs: int = 1) -> ExperimentResult:
    """Shrink B from b1*n to b2*n via contacts with a fixed A population.

    The closed-form prediction is meaningful for any fractions, but a
    disjoint realization needs a + b1 <= 1 (use ``one_sided_prediction``
    directly for the abstract rate process)."""
    if not (0 < b2 < b1 < 1 and 0 < a < 1):
        raise ValueError("need 0 < b2 < b1 < 1 and 0 < a < 1")
    if a + b1 > 1:
        raise ValueError("fractions a + b1 must fit in one population")
    args = [(n, a, b1, b2, spawn_seed(seed, t)) for t in range(trials)]
    samples = _map_trials(_one_sided_trial, args, jobs)
    return _verdict("one-sided",
                    {"n": n, "a": a, "b1": b1, "b2": b2, "trials": trials, "seed": seed},
                    samples, one_sided_prediction(a, b1, b2), tolerance)
