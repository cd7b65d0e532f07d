"""Seeded experiment harness.

An :class:`ExperimentSpec` fixes the problem generator, the algorithm
list, the schedules and the budget. Every ``(instance, repetition)`` pair
gets its own seed derived from ``base_seed``, so results do not depend on
worker count or on how many repetitions are requested.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .core import CoolingSchedule, derive_seed
from .errors import ConfigurationError, PnsError
from .optimizers import (Algorithm, OptRunConfig, PnsStrategy, SubsetMethod,
                         evaluations_per_step, jump_log_weights, run_optimizer)
from .problems import (generate_3r3xor, generate_knapsack, generate_qubo, generate_simplex_qp,
                       load_instance, model_for)
from .problems.base import ProblemModel

logger = logging.getLogger(__name__)

__all__ = [
    "BudgetMode",
    "AlgorithmSpec",
    "ProblemSpec",
    "ExperimentSpec",
    "RunSummary",
    "TtsSpec",
    "TtsSummary",
    "generate_qubo",
    "generate_knapsack",
    "run_experiment",
    "time_to_solution",
    "important_neighbors",
    "summarize_to_files",
    "quantiles",
]

MANIFEST_SCHEMA = 1
_INSTANCE_KEY = 0x1
_RUN_KEY = 0x2
_TTS_KEY = 0x3

SAMPLE_FIELDS = ["schedule", "algorithm", "instance", "repetition", "seed", "best",
                 "best_log_target", "evaluations", "iterations", "steps_to_best"]
TTS_FIELDS = ["n", "algorithm", "instance", "repetition", "seed", "solved", "steps",
              "evaluations"]


class BudgetMode(str, Enum):
    EVALUATION = "evaluation"
    STEP = "step"


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm column of an experiment, e.g. ``pns:1/4`` or ``tabu:3``."""

    label: str
    algorithm: Algorithm
    pns: PnsStrategy | None = None
    tabu_length: int | None = None

    @classmethod
    def parse(cls, token: str) -> "AlgorithmSpec":
        parts = token.strip().split(":")
        name = parts[0].lower()
        try:
            if name == "sa" and len(parts) == 1:
                return cls("sa", Algorithm.SA)
            if name == "rf" and len(parts) == 1:
                return cls("rf", Algorithm.RF)
            if name == "pns" and 1 <= len(parts) <= 4:
                frac = parts[1] if len(parts) > 1 else "1/2"
                method = SubsetMethod(parts[2].upper()) if len(parts) > 2 else SubsetMethod.A
                kwargs = {"candidates": int(parts[3])} if len(parts) > 3 else {}
                strategy = PnsStrategy(method, frac, **kwargs)
                return cls(token.strip(), Algorithm.PNS, pns=strategy)
            if name == "tabu" and len(parts) == 2:
                return cls(token.strip(), Algorithm.TABU, tabu_length=int(parts[1]))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigurationError(f"bad algorithm {token!r}: {exc}") from None
        raise ConfigurationError(
            f"bad algorithm {token!r}; expected sa, rf, pns:<fraction>[:<A-D>[:<candidates>]] "
            "or tabu:<L>")

    def config(self, schedule: CoolingSchedule, iterations: int, **kw) -> OptRunConfig:
        return OptRunConfig(self.algorithm, schedule.with_steps(iterations), iterations,
                            pns=self.pns, tabu_length=self.tabu_length, **kw)


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    n: int
    params: dict = field(default_factory=dict)
    path: str | None = None

    def generate(self, rng: np.random.Generator):
        if self.path is not None:
            return load_instance(self.path)
        p = self.params
        if self.kind == "qubo":
            return generate_qubo(self.n, rng, p.get("sigma", 100.0), p.get("with_diagonal", True))
        if self.kind == "knapsack":
            return generate_knapsack(self.n, p.get("capacity", 100.0 * self.n), rng,
                                     p.get("mean", 1000.0))
        if self.kind == "ising3xor":
            return generate_3r3xor(self.n, rng, p.get("max_tries", 1000))
        if self.kind == "simplexqp":
            return generate_simplex_qp(self.n, rng, p.get("sigma", 100.0),
                                       p.get("step_sigma", 0.1))
        raise ConfigurationError(f"unknown problem kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    problem: ProblemSpec
    algorithms: tuple
    schedules: tuple = ("geometric:10:0.1",)
    repetitions: int = 10
    base_seed: int = 0
    budget_mode: BudgetMode = BudgetMode.EVALUATION
    budget: int = 10000
    instances: int = 1
    init: str = "default"

    def __post_init__(self):
        object.__setattr__(self, "budget_mode", BudgetMode(self.budget_mode))
        algs = tuple(a if isinstance(a, AlgorithmSpec) else AlgorithmSpec.parse(a)
                     for a in self.algorithms)
        object.__setattr__(self, "algorithms", algs)
        object.__setattr__(self, "schedules", tuple(self.schedules))
        for text in self.schedules:
            CoolingSchedule.parse(text, 2)
        if self.repetitions < 1 or self.instances < 1:
            raise ConfigurationError("repetitions and instances must be >= 1")
        if self.budget < 1:
            raise ConfigurationError("budget must be >= 1")
        if not algs:
            raise ConfigurationError("at least one algorithm is required")

    def to_dict(self) -> dict:
        return {
            "problem": asdict(self.problem),
            "algorithms": [a.label for a in self.algorithms],
            "schedules": list(self.schedules),
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
            "budget_mode": self.budget_mode.value,
            "budget": self.budget,
            "instances": self.instances,
            "init": self.init,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        doc = dict(doc)
        doc["problem"] = ProblemSpec(**doc["problem"])
        return cls(**doc)

    def instance_seed(self, i: int) -> int:
        return derive_seed(self.base_seed, _INSTANCE_KEY, i)

    def run_seed(self, i: int, r: int) -> int:
        return derive_seed(self.base_seed, _RUN_KEY, i, r)


def quantiles(samples) -> tuple[float, float, float]:
    """25/50/75% points with linear interpolation between order statistics."""
    q = np.percentile(np.asarray(samples, dtype=float), [25, 50, 75])
    return float(q[0]), float(q[1]), float(q[2])


@dataclass
class RunSummary:
    spec: ExperimentSpec
    samples: list                       # one dict per (instance, repetition, schedule, algorithm)
    failures: list = field(default_factory=list)

    def groups(self) -> dict:
        out: dict = {}
        for row in self.samples:
            out.setdefault((row["schedule"], row["algorithm"]), []).append(row)
        return out

    def table(self) -> list[dict]:
        rows = []
        for (sched, alg), grp in self.groups().items():
            best = [r["best"] for r in grp]
            q25, q50, q75 = quantiles(best)
            rows.append({
                "schedule": sched, "algorithm": alg, "count": len(best),
                "mean": float(np.mean(best)), "q25": q25, "q50": q50, "q75": q75,
                "mean_wall_time": float(np.mean([r.get("wall_time", np.nan) for r in grp])),
                "mean_evaluations": float(np.mean([r["evaluations"] for r in grp])),
            })
        return rows

    def best_values(self, algorithm: str, schedule: str | None = None) -> np.ndarray:
        return np.array([r["best"] for r in self.samples if r["algorithm"] == algorithm
                         and (schedule is None or r["schedule"] == schedule)])

    def mean(self, algorithm: str, schedule: str | None = None) -> float:
        return float(self.best_values(algorithm, schedule).mean())

    @property
    def completed(self) -> int:
        return len({(r["instance"], r["repetition"]) for r in self.samples})


@lru_cache(maxsize=8)
def _cached_model(problem_json: str, seed: int) -> ProblemModel:
    problem = ProblemSpec(**json.loads(problem_json))
    return model_for(problem.generate(np.random.default_rng(seed)),
                     knapsack_target=problem.params.get("target", "linear"))


def _model(spec_problem: ProblemSpec, seed: int) -> ProblemModel:
    return _cached_model(json.dumps(asdict(spec_problem), sort_keys=True), seed)


def iterations_for(model: ProblemModel, alg: AlgorithmSpec, mode: BudgetMode, budget: int) -> int:
    if mode is BudgetMode.STEP:
        return budget
    probe = alg.config(CoolingSchedule.constant(1.0), 1)
    return max(1, budget // evaluations_per_step(model, probe))


def _experiment_task(args):
    spec_doc, i, r = args
    spec = ExperimentSpec.from_dict(spec_doc)
    seed = spec.run_seed(i, r)
    rows = []
    try:
        model = _model(spec.problem, spec.instance_seed(i))
        for sched_text in spec.schedules:
            for alg in spec.algorithms:
                iters = iterations_for(model, alg, spec.budget_mode, spec.budget)
                sched = CoolingSchedule.parse(sched_text, max(iters, 2))
                cfg = alg.config(sched, iters, init=spec.init, record_trace=False)
                tr = run_optimizer(model, cfg, seed)
                rows.append({
                    "schedule": sched_text, "algorithm": alg.label, "instance": i,
                    "repetition": r, "seed": seed, "best": tr.best_value,
                    "best_log_target": tr.best_log_target, "evaluations": tr.evaluations,
                    "iterations": tr.iterations_run, "steps_to_best": tr.steps_to_best,
                    "wall_time": tr.wall_time,
                })
    except PnsError as exc:
        return [], {"instance": i, "repetition": r, "seed": seed, "error": repr(exc)}
    return rows, None


def _map(fn, tasks, jobs: int):
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> RunSummary:
    """Run every algorithm and schedule for every ``(instance, repetition)``."""
    doc = spec.to_dict()
    tasks = [(doc, i, r) for i in range(spec.instances) for r in range(spec.repetitions)]
    samples, failures = [], []
    for rows, failure in _map(_experiment_task, tasks, jobs):
        samples.extend(rows)
        if failure is not None:
            logger.warning("repetition %(repetition)d of instance %(instance)d failed: %(error)s",
                           failure)
            failures.append(failure)
    return RunSummary(spec, samples, failures)


def important_neighbors(model: ProblemModel, state, temp: float,
                        threshold_log: float = -10.0) -> np.ndarray:
    """Neighbour positions whose transition weight exceeds ``exp(threshold_log)``
    times the largest one."""
    lq = jump_log_weights(model.walker(state), temp)
    top = lq.max()
    if top == -np.inf:
        return np.array([], dtype=np.int64)
    return np.flatnonzero(lq > threshold_log + top)


@dataclass(frozen=True)
class TtsSpec:
    """Time-to-solution study on planted 3R3XOR instances."""

    sizes: tuple = (12, 24)
    algorithms: tuple = ("rf", "pns:1/4", "pns:1/2", "pns:3/4")
    instances: int = 50
    repetitions: int = 1
    base_seed: int = 0
    budget: int = 1_000_000
    schedule: str = "constant:1"
    init: str = "random"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        algs = tuple(a if isinstance(a, AlgorithmSpec) else AlgorithmSpec.parse(a)
                     for a in self.algorithms)
        object.__setattr__(self, "algorithms", algs)
        CoolingSchedule.parse(self.schedule, 2)
        if self.instances < 1 or self.repetitions < 1 or self.budget < 1:
            raise ConfigurationError("instances, repetitions and budget must be >= 1")

    def to_dict(self) -> dict:
        return {"sizes": list(self.sizes), "algorithms": [a.label for a in self.algorithms],
                "instances": self.instances, "repetitions": self.repetitions,
                "base_seed": self.base_seed, "budget": self.budget,
                "schedule": self.schedule, "init": self.init}

    @classmethod
    def from_dict(cls, doc: dict) -> "TtsSpec":
        return cls(**doc)

    def instance_seed(self, n: int, i: int) -> int:
        return derive_seed(self.base_seed, _TTS_KEY, n, i)

    def run_seed(self, n: int, i: int, r: int) -> int:
        return derive_seed(self.base_seed, _RUN_KEY, n, i, r)


@dataclass
class TtsSummary:
    spec: TtsSpec
    samples: list

    def table(self) -> list[dict]:
        groups: dict = {}
        for row in self.samples:
            groups.setdefault((row["algorithm"], row["n"]), []).append(row)
        out = []
        for (alg, n), grp in groups.items():
            ok = [r for r in grp if r["solved"]]
            med = (lambda key: float(np.median([r[key] for r in ok])) if ok else float("nan"))
            out.append({"algorithm": alg, "n": n, "runs": len(grp), "solved": len(ok),
                        "timeouts": len(grp) - len(ok), "median_steps": med("steps"),
                        "median_evaluations": med("evaluations"),
                        "median_wall_time": med("wall_time")})
        return out

    def median_evaluations(self, algorithm: str, n: int) -> float:
        for row in self.table():
            if row["algorithm"] == algorithm and row["n"] == n:
                return row["median_evaluations"]
        raise KeyError((algorithm, n))


def _tts_task(args):
    doc, n, i, r = args
    spec = TtsSpec.from_dict(doc)
    model = model_for(generate_3r3xor(n, np.random.default_rng(spec.instance_seed(n, i))))
    seed = spec.run_seed(n, i, r)
    rows = []
    for alg in spec.algorithms:
        iters = iterations_for(model, alg, BudgetMode.EVALUATION, spec.budget)
        sched = CoolingSchedule.parse(spec.schedule, max(iters, 2))
        cfg = alg.config(sched, iters, init=spec.init, target=model.optimum, record_trace=False)
        tr = run_optimizer(model, cfg, seed)
        rows.append({"n": n, "algorithm": alg.label, "instance": i, "repetition": r,
                     "seed": seed, "solved": tr.reached_target,
                     "steps": tr.iterations_run if tr.reached_target else -1,
                     "evaluations": (tr.evaluations_to_target if tr.reached_target else -1),
                     "wall_time": tr.wall_time})
    return rows


def time_to_solution(spec: TtsSpec, jobs: int = 1) -> TtsSummary:
    """Run each algorithm until it reaches the planted optimum or exhausts the budget."""
    doc = spec.to_dict()
    tasks = [(doc, n, i, r) for n in spec.sizes for i in range(spec.instances)
             for r in range(spec.repetitions)]
    samples = [row for rows in _map(_tts_task, tasks, jobs) for row in rows]
    return TtsSummary(spec, samples)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(fields)
        for row in rows:
            out.writerow([_fmt(row[f]) for f in fields])


def summarize_to_files(summary: RunSummary | TtsSummary, prefix) -> dict[str, Path]:
    """Write ``<prefix>_samples.csv``, ``<prefix>_summary.csv`` and ``<prefix>_manifest.json``."""
    prefix = Path(prefix)
    paths = {"samples": prefix.with_name(prefix.name + "_samples.csv"),
             "summary": prefix.with_name(prefix.name + "_summary.csv"),
             "manifest": prefix.with_name(prefix.name + "_manifest.json")}
    tts = isinstance(summary, TtsSummary)
    try:
        prefix.parent.mkdir(parents=True, exist_ok=True)
        _write_csv(paths["samples"], TTS_FIELDS if tts else SAMPLE_FIELDS, summary.samples)
        table = summary.table()
        if table:
            _write_csv(paths["summary"], list(table[0].keys()), table)
        else:
            paths["summary"].write_text("", encoding="utf-8")
        spec = summary.spec
        manifest = {
            "schema_version": MANIFEST_SCHEMA,
            "kind": "tts" if tts else "experiment",
            "library_version": __version__,
            "spec": spec.to_dict(),
            "base_seed": spec.base_seed,
            "seeds": sorted({row["seed"] for row in summary.samples}),
            "failures": [] if tts else summary.failures,
        }
        paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    except OSError as exc:
        raise OSError(f"could not write results under {prefix}: {exc}") from exc
    return paths


def read_samples(path) -> list[dict]:
    """Parse a samples CSV back into typed rows."""
    ints = {"instance", "repetition", "seed", "evaluations", "iterations", "steps_to_best",
            "n", "steps", "solved"}
    floats = {"best", "best_log_target", "wall_time"}
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                row[k] = int(v) if k in ints else float(v) if k in floats else v
            rows.append(row)
    return rows


def load_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def rerun_from_manifest(path, jobs: int = 1) -> RunSummary | TtsSummary:
    doc = load_manifest(path)
    if doc["kind"] == "tts":
        return time_to_solution(TtsSpec.from_dict(doc["spec"]), jobs)
    return run_experiment(ExperimentSpec.from_dict(doc["spec"]), jobs)


def format_table(rows: list[dict], columns: list[str]) -> str:
    """Fixed-width plain-text table."""
    def cell(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)
    body = [[cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[k]) for b in body)) if body else len(c)
              for k, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def fraction_label(x: float) -> str:
    return str(Fraction(x).limit_denominator(1000))
