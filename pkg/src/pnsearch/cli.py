"""Command-line interface.

Exit codes: 0 success, 2 invalid flags or configuration, 3 I/O failure,
4 runtime failure (for example an absorbing state).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (BudgetMode, ExperimentSpec, RunSummary,
                    TtsSpec, TtsSummary, format_table, read_samples, run_experiment,
                    summarize_to_files, time_to_solution)
from .core import CoolingSchedule, MASK64
from .errors import ConfigurationError, PnsError
from .optimizers import (Algorithm, OptRunConfig, PnsStrategy, SubsetMethod, run_optimizer,
                         write_trace_csv)
from .problems import (digest, generate_3r3xor, generate_knapsack, generate_qubo,
                       generate_simplex_qp, ising_energy, load_instance, model_for,
                       save_instance)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_RUNTIME = 4

KINDS = ("qubo", "knapsack", "ising3xor", "simplexqp")
SUMMARY_COLUMNS = ["schedule", "algorithm", "count", "mean", "q25", "q50", "q75",
                   "mean_evaluations"]
TTS_COLUMNS = ["algorithm", "n", "runs", "solved", "timeouts", "median_steps",
               "median_evaluations"]

log = logging.getLogger("pnsearch")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pnsearch", allow_abbrev=False,
                description="Rejection-free and partial neighbor search optimisers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", allow_abbrev=False, help="write a random instance file")
    g.add_argument("--kind", required=True, choices=KINDS)
    g.add_argument("--n", required=True, type=_positive_int)
    g.add_argument("--seed", required=True, type=int)
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--capacity", type=float, help="knapsack capacity (default 100*n)")
    g.add_argument("--sigma", type=float, default=100.0, help="QUBO entry standard deviation")
    g.add_argument("--no-diagonal", action="store_true", help="QUBO without diagonal terms")
    g.add_argument("--step-sigma", type=float, default=0.1, help="simplex proposal scale")

    r = sub.add_parser("run", allow_abbrev=False, help="run one optimiser on an instance file")
    r.add_argument("--instance", required=True, type=Path)
    r.add_argument("--alg", required=True, choices=[a.value for a in Algorithm])
    r.add_argument("--fraction", default="1/2", help="PNS subset fraction, e.g. 0.25 or 1/4")
    r.add_argument("--method", default="A", choices=[m.value for m in SubsetMethod])
    r.add_argument("--candidates", type=_positive_int, default=20,
                   help="PNS candidate count on continuous problems")
    r.add_argument("--tabu-length", type=_nonneg_int, default=1)
    r.add_argument("--schedule", default="geometric:10:0.1")
    r.add_argument("--iters", required=True, type=_nonneg_int)
    r.add_argument("--seed", type=int, help="default: derived from the clock and echoed")
    r.add_argument("--init", default="default", choices=["default", "zeros", "random"])
    r.add_argument("--knapsack-target", default="linear", choices=["linear", "exponential"],
                   help="knapsack pi = v.x (linear) or log pi = v.x (exponential)")
    r.add_argument("--trace", type=Path, help="write the visited states as CSV")
    r.add_argument("--timing", action="store_true", help="include wall times in the trace")

    b = sub.add_parser("bench", allow_abbrev=False, help="seeded multi-algorithm comparison")
    b.add_argument("--spec", type=Path, help="JSON experiment spec; flags below override it")
    b.add_argument("--kind", choices=KINDS)
    b.add_argument("--n", type=_positive_int)
    b.add_argument("--instance", type=Path, help="use this instance file instead of generating")
    b.add_argument("--capacity", type=float)
    b.add_argument("--knapsack-target", choices=["linear", "exponential"])
    b.add_argument("--alg", action="append", help="sa, rf, pns:<frac>[:<A-D>], tabu:<L>")
    b.add_argument("--schedule", action="append")
    b.add_argument("--reps", type=_positive_int)
    b.add_argument("--instances", type=_positive_int)
    b.add_argument("--budget", type=_positive_int)
    b.add_argument("--budget-mode", choices=[m.value for m in BudgetMode])
    b.add_argument("--init", choices=["default", "zeros", "random"])
    b.add_argument("--seed", required=True, type=int)
    b.add_argument("--jobs", type=_positive_int, default=1)
    b.add_argument("--out", required=True, type=Path, help="output path prefix")

    t = sub.add_parser("tts", allow_abbrev=False, help="time to reach the planted optimum")
    t.add_argument("--sizes", type=_positive_int, nargs="+", default=[12])
    t.add_argument("--alg", action="append")
    t.add_argument("--instances", type=_positive_int, default=50)
    t.add_argument("--reps", type=_positive_int, default=1)
    t.add_argument("--budget", type=_positive_int, default=1_000_000,
                   help="neighbour evaluations per run")
    t.add_argument("--schedule", default="constant:1")
    t.add_argument("--init", default="random", choices=["default", "zeros", "random"])
    t.add_argument("--seed", required=True, type=int)
    t.add_argument("--jobs", type=_positive_int, default=1)
    t.add_argument("--out", required=True, type=Path, help="output path prefix")

    rep = sub.add_parser("report", allow_abbrev=False, help="quantile table from a samples CSV")
    rep.add_argument("samples", type=Path)
    rep.add_argument("--out", type=Path, help="plot-ready CSV (default <samples>_plot.csv)")
    return p


def _generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "qubo":
        inst = generate_qubo(args.n, rng, args.sigma, not args.no_diagonal)
    elif args.kind == "knapsack":
        cap = args.capacity if args.capacity is not None else 100.0 * args.n
        inst = generate_knapsack(args.n, cap, rng)
    elif args.kind == "ising3xor":
        inst = generate_3r3xor(args.n, rng)
    else:
        inst = generate_simplex_qp(args.n, rng, args.sigma, args.step_sigma)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    doc = save_instance(inst, args.out)
    line = f"kind={args.kind} n={args.n} digest={digest(doc)}"
    if args.kind == "ising3xor":
        line += f" planted_energy={ising_energy(inst, inst.planted):g}"
    print(line)
    print(f"wrote {args.out}")
    return EXIT_OK


def _run(args) -> int:
    seed = args.seed
    if seed is None:
        seed = time.time_ns() & MASK64
        print(f"SEED {seed}")
    model = model_for(load_instance(args.instance), knapsack_target=args.knapsack_target)
    iters = args.iters
    schedule = CoolingSchedule.parse(args.schedule, max(iters, 2))
    pns = None
    if args.alg == Algorithm.PNS.value:
        pns = PnsStrategy(SubsetMethod(args.method), args.fraction, candidates=args.candidates)
    cfg = OptRunConfig(Algorithm(args.alg), schedule, iters, pns=pns,
                       tabu_length=args.tabu_length, init=args.init)
    tr = run_optimizer(model, cfg, seed)
    if args.trace is not None:
        args.trace.parent.mkdir(parents=True, exist_ok=True)
        write_trace_csv(args.trace, tr, timing=args.timing)
    print(f"evaluations {tr.evaluations} iterations {tr.iterations_run}")
    print(f"BEST {tr.best_value!r} STEPS {tr.steps_to_best}")
    return EXIT_OK


def _bench_spec(args) -> ExperimentSpec:
    doc: dict = {}
    if args.spec is not None:
        doc = json.loads(args.spec.read_text(encoding="utf-8"))
    problem = dict(doc.get("problem", {}))
    problem.setdefault("params", {})
    if args.kind is not None:
        problem["kind"] = args.kind
    if args.n is not None:
        problem["n"] = args.n
    if args.instance is not None:
        inst = load_instance(args.instance)
        problem.update(kind=model_for(inst).kind, n=int(inst.n), path=str(args.instance))
    if args.capacity is not None:
        problem["params"] = {**problem["params"], "capacity": args.capacity}
    if args.knapsack_target is not None:
        problem["params"] = {**problem["params"], "target": args.knapsack_target}
    if "kind" not in problem or "n" not in problem:
        raise ConfigurationError("bench needs --kind and --n, --instance, or a --spec file")
    overrides = {"algorithms": args.alg, "schedules": args.schedule, "repetitions": args.reps,
                 "instances": args.instances, "budget": args.budget,
                 "budget_mode": args.budget_mode, "init": args.init}
    for key, val in overrides.items():
        if val is not None:
            doc[key] = val
    doc["problem"] = problem
    doc["base_seed"] = args.seed
    doc.setdefault("algorithms", ["sa", "rf", "pns:1/4"])
    try:
        return ExperimentSpec.from_dict(doc)
    except TypeError as exc:
        raise ConfigurationError(f"bad experiment spec: {exc}") from None


def _bench(args) -> int:
    spec = _bench_spec(args)
    summary = run_experiment(spec, jobs=args.jobs)
    paths = summarize_to_files(summary, args.out)
    print(format_table(summary.table(), SUMMARY_COLUMNS))
    for f in summary.failures:
        print(f"FAILED instance {f['instance']} repetition {f['repetition']}: {f['error']}")
    for key, path in paths.items():
        print(f"{key} {path}")
    print(f"COMPLETED {summary.completed} OF {spec.instances * spec.repetitions}")
    return EXIT_OK


def _tts(args) -> int:
    spec = TtsSpec(sizes=tuple(args.sizes),
                   algorithms=tuple(args.alg or ("rf", "pns:1/4", "pns:1/2", "pns:3/4")),
                   instances=args.instances, repetitions=args.reps, base_seed=args.seed,
                   budget=args.budget, schedule=args.schedule, init=args.init)
    summary = time_to_solution(spec, jobs=args.jobs)
    paths = summarize_to_files(summary, args.out)
    print(format_table(summary.table(), TTS_COLUMNS))
    for key, path in paths.items():
        print(f"{key} {path}")
    return EXIT_OK


def _report(args) -> int:
    rows = read_samples(args.samples)
    with open(args.samples, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if "solved" in header:
        summary = TtsSummary(None, [{**r, "wall_time": float("nan")} for r in rows])
        columns = TTS_COLUMNS
    else:
        summary = RunSummary(None, [{**r, "wall_time": float("nan")} for r in rows])
        columns = SUMMARY_COLUMNS
    table = summary.table()
    print(format_table(table, columns))
    out = args.out or args.samples.with_name(args.samples.stem + "_plot.csv")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in table:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    print(f"plot {out}")
    return EXIT_OK


_COMMANDS = {"generate": _generate, "run": _run, "bench": _bench, "tts": _tts,
             "report": _report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
        # ValueError covers malformed instance files and bad flag values
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PnsError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
