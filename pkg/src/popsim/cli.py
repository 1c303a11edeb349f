"""Command-line entry point.

Subcommands::

    popsim run        one protocol run; writes result.json, timeline.csv, meta.json
    popsim sweep      repeat runs over an n- or gap-axis; writes summary.csv
    popsim experiment closed-form timing checks; writes experiment.json

Output lands in <out>/<protocol>/<label-or-timestamp>/.  Exit codes:
0 ok, 1 config error, 2 correctness failure, 3 guard exhausted.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import clock as clockmod
from . import engine, metrics, sizeest
from .majority import (
    BackupSpec,
    MajorityParams,
    MajoritySpec,
    PRESETS,
    exact_majority_oracle,
    majority_inputs,
)
from .rng import spawn_seed

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INCORRECT = 2
EXIT_GUARD = 3


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; that slot is taken
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _add_common(p: _Parser) -> None:
    p.add_argument("--protocol", choices=["majority", "backup", "clock", "sizeest", "epidemic"],
                   default="majority")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--gap", type=int, default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="defaults to $POPSIM_SEED, then 0")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--p", type=float, default=None, help="drip probability")
    p.add_argument("--k", type=int, default=None, help="minutes per hour")
    p.add_argument("--L", type=int, default=None, help="exponent depth")
    p.add_argument("--counter-mult", type=float, default=None,
                   help="counter multiplier applied to all timed phases")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--stop", default=None, help="'silent', 'time=T' or 'interactions=K'")
    p.add_argument("--guard", type=int, default=None, help="hard interaction cap")
    p.add_argument("--snapshot-dt", type=float, default=None)
    p.add_argument("--project", default=None,
                   help="comma-separated state fields for timeline keys")
    p.add_argument("--infected-frac", type=float, default=None,
                   help="epidemic protocol: initial infected fraction")
    p.add_argument("--out", default="out")
    p.add_argument("--label", default=None, help="run directory name (default: timestamp)")
    p.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    p.add_argument("--config", default=None, help="key=value file; flags override it")


_DEFAULTS = {
    "protocol": "majority", "n": 1000, "gap": 2, "trials": 1, "preset": "paper-sim",
    "stop": "silent", "snapshot_dt": 0.25, "out": "out", "jobs": 1,
    "infected_frac": None, "p": None, "k": None, "L": None, "counter_mult": None,
    "seed": None, "guard": None, "label": None, "project": None,
}

_INT_KEYS = {"n", "gap", "seed", "trials", "k", "L", "guard", "jobs"}
_FLOAT_KEYS = {"p", "counter_mult", "snapshot_dt", "infected_frac"}


def _load_config(path: str) -> dict:
    out = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _DEFAULTS:
            raise CliError(f"{path}:{line_no}: unknown key {key!r}")
        if key in _INT_KEYS:
            out[key] = int(value)
        elif key in _FLOAT_KEYS:
            out[key] = float(value)
        else:
            out[key] = value
    return out


def _settings(args: argparse.Namespace) -> dict:
    """Preset defaults < config file < explicit flags."""
    s = dict(_DEFAULTS)
    if args.config:
        s.update(_load_config(args.config))
    for key in _DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            s[key] = v
    if s["seed"] is None:
        s["seed"] = int(os.environ.get("POPSIM_SEED", "0"))
    return s


def _majority_params(s: dict) -> MajorityParams:
    preset = PRESETS[s["preset"]]
    overrides = {}
    if s["k"] is not None:
        overrides["k"] = s["k"]
    if s["p"] is not None:
        overrides["p"] = s["p"]
    if s["L"] is not None:
        overrides["L"] = s["L"]
    if s["counter_mult"] is not None:
        overrides.update({f"c{i}": s["counter_mult"] for i in range(9)})
    overrides["seed"] = s["seed"]
    return preset(s["n"], **overrides)


def _parse_stop(text: str, n: int):
    if text == "silent":
        return engine.Silent()
    if text.startswith("time="):
        return engine.MaxParallelTime(float(text[5:]))
    if text.startswith("interactions="):
        return engine.MaxInteractions(int(text[13:]))
    raise CliError(f"unknown stop condition {text!r}")


def _default_guard(protocol: str, n: int) -> int:
    if protocol in ("majority", "backup"):
        return max(10**7, math.ceil(6 * n * n * math.log(max(n, 2))))
    if protocol == "sizeest":
        return int(60 * n * n * max(1, math.ceil(math.log2(max(n, 2)))))
    return max(10**7, int(100 * n * math.log(max(n, 2))) + n)


def _run_dir(s: dict) -> Path:
    label = s["label"] or time.strftime("%Y%m%d-%H%M%S")
    path = Path(s["out"]) / s["protocol"] / label
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_meta(path: Path, s: dict, extra: dict = None) -> None:
    meta = {k: v for k, v in sorted(s.items())}
    meta.update(extra or {})
    (path / "meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")


def _default_projection(protocol: str) -> tuple:
    return {
        "majority": ("phase", "role", "opinion", "exponent", "output"),
        "backup": ("output", "active"),
        "clock": ("minute",),
        "sizeest": ("kind", "value"),
        "epidemic": ("state",),
    }[protocol]


def _single_run(s: dict, seed: int, record_timeline: bool = True):
    """One run per the settings; returns (result, correct, oracle_output)."""
    protocol = s["protocol"]
    n = s["n"]
    guard = s["guard"] or _default_guard(protocol, n)
    stop = _parse_stop(s["stop"], n)
    snapshot_dt = s["snapshot_dt"]

    if protocol in ("majority", "backup"):
        gap = s["gap"]
        inputs = majority_inputs(n, gap)
        spec = MajoritySpec(_majority_params(s)) if protocol == "majority" else BackupSpec()
        table = s.setdefault("_tables", {}).setdefault(protocol, engine.TransitionTable(spec))
        if table.spec is not spec:
            spec = table.spec
        pop = engine.new_population(spec, inputs, seed=seed, table=table)
        res = engine.run_until(pop, stop, guard=guard, snapshot_dt=snapshot_dt,
                               record_timeline=record_timeline)
        want = exact_majority_oracle((n + gap) // 2, (n - gap) // 2)
        correct = bool(res.silent and res.output == want)
        return res, correct, want
    if protocol == "sizeest":
        spec = s.setdefault("_tables", {}).setdefault("sizeest_spec", sizeest.SizeEstSpec())
        table = s["_tables"].setdefault("sizeest", engine.TransitionTable(spec))
        pop = engine.new_population(spec, [0] * n, seed=seed, table=table)
        res = engine.run_until(pop, stop, guard=guard, snapshot_dt=snapshot_dt,
                               record_timeline=record_timeline)
        report = sizeest.sizeest_check(pop, n, res.last_change_time, res.mass_violations)
        return res, report.ok, report
    if protocol == "epidemic":
        frac = s["infected_frac"]
        n_inf = max(1, math.ceil((frac or 1.0 / n) * n))
        spec = metrics.EpidemicSpec()
        pop = engine.new_population(spec, ["I"] * n_inf + ["S"] * (n - n_inf), seed=seed)
        res = engine.run_until(pop, stop, guard=guard, snapshot_dt=snapshot_dt,
                               record_timeline=record_timeline)
        return res, None, None
    raise CliError(f"protocol {protocol!r} is not runnable via `run`")


def cmd_run(args: argparse.Namespace) -> int:
    s = _settings(args)
    protocol = s["protocol"]
    outdir = _run_dir(s)

    if protocol == "clock":
        n = s["n"]
        p = s["p"] if s["p"] is not None else 0.1
        k = s["k"] if s["k"] is not None else 2
        L = s["L"] if s["L"] is not None else max(1, math.ceil(math.log2(n)))
        window = (min(9, k * L - 1), min(18, k * L - 1))
        stats = clockmod.measure_minutes(n, p=p, k=k, L=L, window=window, seed=s["seed"],
                                         snapshot_dt=s["snapshot_dt"] if s["snapshot_dt"] != 0.25 else 0.01)
        clockmod.write_minutes_csv(stats, outdir / "minutes.csv")
        clockmod.write_crossings_csv(stats, outdir / "crossings.csv")
        result = {
            "output": None, "correct": None, "stabilization_time": None,
            "silent": False, "interactions": None,
        }
        (outdir / "result.json").write_text(json.dumps(result, indent=2) + "\n")
        _write_meta(outdir, {k2: v for k2, v in s.items() if not k2.startswith("_")},
                    {"p": p, "k": k, "L": L, "window": list(window),
                     "complete": stats.complete})
        print(f"wrote {outdir}/minutes.csv, crossings.csv")
        return EXIT_OK

    res, correct, extra = _single_run(s, s["seed"])
    fields = tuple(s["project"].split(",")) if s["project"] else _default_projection(protocol)
    timeline = metrics.project_timeline(res, fields)
    metrics.write_timeline_csv(timeline, outdir / "timeline.csv")
    result = {
        "output": res.output,
        "correct": correct,
        "stabilization_time": res.stabilization_time,
        "silent": res.silent,
        "interactions": res.interactions,
    }
    (outdir / "result.json").write_text(json.dumps(result, indent=2) + "\n")
    if protocol == "sizeest":
        (outdir / "report.json").write_text(extra.to_json() + "\n")
    _write_meta(outdir, {k: v for k, v in s.items() if not k.startswith("_")},
                {"projection": list(fields), "hit_guard": res.hit_guard,
                 "parallel_time": res.parallel_time,
                 "mass_violations": res.mass_violations})
    print(f"wrote {outdir}/result.json (output={res.output}, correct={correct}, "
          f"t={res.parallel_time:.2f})")
    if res.hit_guard:
        return EXIT_GUARD
    if correct is False:
        return EXIT_INCORRECT
    return EXIT_OK


def _sweep_trial(job) -> tuple:
    """Picklable per-trial worker for --jobs > 1; rebuilds everything from
    the settings so results are independent of the process layout."""
    point, seed = job
    res, correct, _ = _single_run(dict(point), seed, record_timeline=False)
    t = res.stabilization_time if res.stabilization_time is not None else res.parallel_time
    return t, correct, res.hit_guard


def cmd_sweep(args: argparse.Namespace) -> int:
    s = _settings(args)
    axis = args.axis
    values = [int(v) for v in args.values.split(",")]
    if not values:
        raise CliError("axis values must be nonempty")
    trials = s["trials"] or 1
    jobs = s["jobs"]
    outdir = _run_dir(s)
    rows = []
    worst = EXIT_OK
    for v in values:
        point = dict(s)
        point["_tables"] = {}  # shared across this point's trials (serial path)
        point[axis] = v
        if axis == "n" and s["protocol"] in ("majority", "backup") and (v + point["gap"]) % 2:
            point["gap"] = point["gap"] + 1  # keep n+gap even along an n-axis
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            clean = {k2: v2 for k2, v2 in point.items() if not k2.startswith("_")}
            jobs_list = [(clean, spawn_seed(point["seed"], t)) for t in range(trials)]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_sweep_trial, jobs_list))
        else:
            outcomes = [_sweep_trial((point, spawn_seed(point["seed"], t)))
                        for t in range(trials)]
        times = [t for t, _, _ in outcomes]
        ok = sum(1 for _, correct, _ in outcomes if correct)
        if any(hit for _, _, hit in outcomes):
            worst = max(worst, EXIT_GUARD)
        if any(correct is False for _, correct, _ in outcomes):
            worst = max(worst, EXIT_INCORRECT)
        rows.append({
            "axis_value": v,
            "trials": trials,
            "correct_rate": ok / trials,
            "mean_time": float(np.mean(times)),
            "p90_time": float(np.percentile(times, 90)),
        })
    import csv as _csv

    with open(outdir / "summary.csv", "w", newline="") as fh:
        w = _csv.DictWriter(fh, fieldnames=["axis_value", "trials", "correct_rate",
                                            "mean_time", "p90_time"])
        w.writeheader()
        w.writerows(rows)
    _write_meta(outdir, {k: v for k, v in s.items() if not k.startswith("_")},
                {"axis": axis, "values": values})
    print(f"wrote {outdir}/summary.csv ({len(rows)} points)")
    return worst


def cmd_experiment(args: argparse.Namespace) -> int:
    s = _settings(args)
    name = args.name
    outdir = _run_dir({**s, "protocol": "experiment"})
    trials = s["trials"] or 20
    n = s["n"] if args.n is not None or s["n"] != _DEFAULTS["n"] else 10**6
    seed, jobs = s["seed"], s["jobs"]

    if name == "epidemic":
        r = metrics.epidemic_experiment(n, args.a, args.b, trials=trials, seed=seed,
                                        tolerance=args.tolerance or 0.03, jobs=jobs)
    elif name == "cancel":
        r = metrics.cancel_experiment(n, args.a, args.b, args.d, trials=trials, seed=seed,
                                      tolerance=args.tolerance or 0.05, jobs=jobs)
    elif name == "one-sided":
        r = metrics.one_sided_cancel_experiment(n, args.a, args.b, args.b2, trials=trials,
                                                seed=seed, tolerance=args.tolerance or 0.05,
                                                jobs=jobs)
    elif name == "minutes":
        p = s["p"] if s["p"] is not None else 1.0
        k = s["k"] if s["k"] is not None else 5
        L = s["L"] if s["L"] is not None else max(1, math.ceil(math.log2(n)))
        samples = []
        for t in range(trials):
            st = clockmod.measure_minutes(n, p=p, k=k, L=L, window=(9, 18),
                                          seed=spawn_seed(seed, t),
                                          record_distribution=False)
            samples.extend(st.minute_lengths)
        lo, hi = 0.45, 2.11 + 0.5 * math.log(1.0 / p)
        mean_pred = 0.75 + 0.5 * math.log(1.0 / p)
        if p == 1.0:
            frac_in = sum(lo <= x <= hi for x in samples) / len(samples)
            passed = frac_in >= 0.95
        else:
            tol = args.tolerance or 0.15
            passed = abs(float(np.mean(samples)) - mean_pred) <= tol * mean_pred
        r = metrics.ExperimentResult(
            name="minutes",
            params={"n": n, "p": p, "k": k, "L": L, "trials": trials, "seed": seed,
                    "bounds": [lo, hi]},
            samples=samples, prediction=mean_pred,
            tolerance=args.tolerance or (0.0 if p == 1.0 else 0.15), passed=passed)
    else:
        raise CliError(f"unknown experiment {name!r}")

    (outdir / "experiment.json").write_text(r.to_json() + "\n")
    _write_meta(outdir, {k2: v for k2, v in s.items() if not k2.startswith("_")},
                {"experiment": name})
    print(f"wrote {outdir}/experiment.json (mean={r.mean:.4f}, prediction={r.prediction:.4f}, "
          f"pass={r.passed})")
    return EXIT_OK if r.passed else EXIT_INCORRECT


def build_parser() -> _Parser:
    parser = _Parser(prog="popsim", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="single protocol run")
    _add_common(run_p)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="runs over an n- or gap-axis")
    _add_common(sweep_p)
    sweep_p.add_argument("--axis", choices=["n", "gap"], required=True)
    sweep_p.add_argument("--values", required=True, help="comma-separated axis values")
    sweep_p.set_defaults(func=cmd_sweep)

    exp_p = sub.add_parser("experiment", help="closed-form timing checks")
    _add_common(exp_p)
    exp_p.add_argument("name", choices=["epidemic", "cancel", "one-sided", "minutes"])
    exp_p.add_argument("--a", type=float, default=0.1)
    exp_p.add_argument("--b", type=float, default=0.9)
    exp_p.add_argument("--d", type=float, default=0.05)
    exp_p.add_argument("--b2", type=float, default=0.05)
    exp_p.add_argument("--tolerance", type=float, default=None)
    exp_p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, engine.EngineError, ValueError) as exc:
        print(f"popsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
