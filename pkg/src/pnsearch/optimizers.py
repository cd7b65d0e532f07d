"""Optimisation drivers: simulated annealing, rejection-free, partial
neighbour search (PNS) and L-step simplified tabu rejection-free.

Every jump-style driver computes, for each candidate ``Y``,

    q(Y) = Q(X, Y) * min{1, [pi(Y) / pi(X)]^(1/T(k))}

in log scale and moves to a candidate with probability proportional to
``q``. They differ only in the candidate set: all neighbours (RF), a
partial subset (PNS), or all neighbours minus the last ``L`` jump states
(tabu).
"""

from __future__ import annotations

import csv
import math
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .core import CoolingSchedule, Purpose, RngStream, as_stream, pick_index, temperatures
from .errors import AbsorbingStateError, ConfigurationError, EmptySupportError
from .problems.base import ProblemModel

__all__ = [
    "Algorithm",
    "SubsetMethod",
    "PnsStrategy",
    "OptRunConfig",
    "OptTrace",
    "PartialNeighborSampler",
    "draw_partial_neighbors",
    "run_sa",
    "run_rf",
    "run_pns",
    "run_tabu_rf",
    "run_optimizer",
    "jump_log_weights",
    "jump_probabilities",
    "evaluations_per_step",
    "write_trace_csv",
]

SUBSET_RETRIES = 100
TARGET_TOL = 1e-9
_BATCH = 256


class Algorithm(str, Enum):
    SA = "sa"
    RF = "rf"
    PNS = "pns"
    TABU = "tabu"


class SubsetMethod(str, Enum):
    A = "A"  # random subset every step
    B = "B"  # random subset every 10 steps
    C = "C"  # one of two fixed blocks every step
    D = "D"  # one of two fixed blocks every 10 steps


def _fraction(value) -> float:
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-12))


@dataclass(frozen=True)
class PnsStrategy:
    """How the partial neighbour set is chosen at each step.

    ``candidates`` only applies to continuous models, where the subset is
    generated rather than selected: it is the number of candidates per
    step, drawn as mirrored ``(+s, -s)`` pairs.
    """

    method: SubsetMethod = SubsetMethod.A
    subset_fraction: float = 0.5
    refresh_period: int | None = None
    partition: tuple | None = None
    candidates: int = 20

    def __post_init__(self):
        method = SubsetMethod(self.method)
        object.__setattr__(self, "method", method)
        frac = _fraction(self.subset_fraction)
        if not 0.0 < frac <= 1.0:
            raise ConfigurationError(f"subset fraction must lie in (0, 1], got {frac}")
        object.__setattr__(self, "subset_fraction", frac)
        if self.refresh_period is None:
            period = 10 if method in (SubsetMethod.B, SubsetMethod.D) else 1
            object.__setattr__(self, "refresh_period", period)
        elif self.refresh_period < 1:
            raise ConfigurationError("refresh_period must be >= 1")
        if self.partition is not None:
            blocks = tuple(np.asarray(b, dtype=np.int64) for b in self.partition)
            if len(blocks) != 2:
                raise ConfigurationError("partition must have exactly two blocks")
            object.__setattr__(self, "partition", blocks)
        if self.candidates < 1:
            raise ConfigurationError("candidates must be >= 1")

    @property
    def systematic(self) -> bool:
        return self.method in (SubsetMethod.C, SubsetMethod.D)

    def subset_size(self, n_neighbors: int) -> int:
        return max(1, round_half_up(self.subset_fraction * n_neighbors))

    def blocks(self, n_neighbors: int) -> tuple[np.ndarray, np.ndarray]:
        if self.partition is not None:
            first, second = self.partition
            union = np.sort(np.concatenate([first, second]))
            if not np.array_equal(union, np.arange(n_neighbors)):
                raise ConfigurationError("partition blocks must be disjoint and cover all neighbours")
            return first, second
        half = n_neighbors // 2
        if n_neighbors < 2:
            raise ConfigurationError("systematic subsets need at least two neighbours")
        return np.arange(half), np.arange(half, n_neighbors)

    @property
    def label(self) -> str:
        frac = Fraction(self.subset_fraction).limit_denominator(1000)
        base = f"pns:{frac}"
        return base if self.method is SubsetMethod.A else f"{base}:{self.method.value}"


@dataclass(frozen=True)
class OptRunConfig:
    algorithm: Algorithm
    schedule: CoolingSchedule
    iterations: int
    pns: PnsStrategy | None = None
    tabu_length: int | None = None
    init: str = "default"
    target: float | None = None
    record_trace: bool = True

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.algorithm is Algorithm.PNS and self.pns is None:
            raise ConfigurationError("PNS needs a PnsStrategy")
        if self.algorithm is Algorithm.TABU and (self.tabu_length is None or self.tabu_length < 0):
            raise ConfigurationError("tabu rejection-free needs tabu_length >= 0")


@dataclass
class OptTrace:
    best_state: object
    best_log_target: float
    best_value: float
    steps_to_best: int
    evaluations: int
    iterations_run: int
    wall_time: float
    initial_log_target: float
    reached_target: bool = False
    evaluations_to_target: int | None = None
    steps: list = field(default_factory=list)
    state_ids: list = field(default_factory=list)
    log_targets: list = field(default_factory=list)
    n_candidates: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)

    @property
    def visited(self) -> list[tuple[int, str, float]]:
        return list(zip(self.steps, self.state_ids, self.log_targets))


class PartialNeighborSampler:
    """Per-run partial neighbour sets for a discrete neighbourhood of size ``n``.

    Subsets are drawn as index sets, which for index-flip neighbourhoods
    makes ``Y in N_k(X)`` equivalent to ``X in N_k(Y)``.
    """

    def __init__(self, strategy: PnsStrategy, n_neighbors: int, rng: np.random.Generator):
        self.strategy = strategy
        self.n = n_neighbors
        self.gen = rng
        self.size = strategy.subset_size(n_neighbors)
        if self.size > n_neighbors:
            raise ConfigurationError(f"subset of {self.size} exceeds {n_neighbors} neighbours")
        self.full = self.size == n_neighbors and not strategy.systematic
        if strategy.systematic:
            self.block_pair = strategy.blocks(n_neighbors)
        self.current: np.ndarray | None = None
        self._queue: list = []

    def _fresh(self) -> np.ndarray:
        if not self._queue:
            if self.strategy.systematic:
                self._queue = list(self.gen.integers(0, 2, size=_BATCH))
            else:
                keys = self.gen.random((_BATCH, self.n))
                rows = np.argpartition(keys, self.size - 1, axis=1)[:, :self.size]
                self._queue = list(rows)
            self._queue.reverse()
        item = self._queue.pop()
        if self.strategy.systematic:
            return self.block_pair[int(item)]
        return item

    def draw(self, k: int) -> np.ndarray | None:
        """Subset for step ``k`` (0-based); None means every neighbour."""
        if self.full:
            return None
        if self.current is None or k % self.strategy.refresh_period == 0:
            self.current = self._fresh()
        return self.current

    def redraw(self) -> np.ndarray | None:
        if self.full:
            return None
        self.current = self._fresh()
        return self.current


def draw_partial_neighbors(strategy: PnsStrategy, n_neighbors: int, k: int,
                           rng: np.random.Generator,
                           previous: np.ndarray | None = None) -> np.ndarray:
    """Stand-alone draw of the partial neighbour index set for step ``k``.

    Methods B and D return ``previous`` unchanged between refresh steps.
    """
    if n_neighbors < 1:
        raise ConfigurationError("state has no neighbours")
    size = strategy.subset_size(n_neighbors)
    if size > n_neighbors:
        raise ConfigurationError(f"subset of {size} exceeds {n_neighbors} neighbours")
    if previous is not None and k % strategy.refresh_period != 0:
        return previous
    if strategy.systematic:
        return strategy.blocks(n_neighbors)[int(rng.integers(0, 2))]
    if size == n_neighbors:
        return np.arange(n_neighbors)
    keys = rng.random(n_neighbors)
    return np.argpartition(keys, size - 1)[:size]


def evaluations_per_step(model: ProblemModel, config: OptRunConfig) -> int:
    alg = config.algorithm
    if alg is Algorithm.SA:
        return 1
    if not model.discrete:
        if alg is Algorithm.PNS:
            return 2 * max(1, config.pns.candidates // 2)
        raise ConfigurationError(f"{alg.value} needs a finite neighbourhood")
    n = model.walker(model.initial_state()).n_neighbors
    if alg is Algorithm.PNS:
        sampler_size = config.pns.subset_size(n)
        if config.pns.systematic:
            return len(config.pns.blocks(n)[0])
        return sampler_size
    return n


class _Tracker:
    """Best-so-far bookkeeping and optional per-step trace."""

    def __init__(self, walker, config: OptRunConfig, t0: float):
        self.record = config.record_trace
        self.target = config.target
        self.t0 = t0
        self.best = walker.log_target
        self.best_state = walker.snapshot()
        self.best_step = 0
        self.reached = self.hit(walker.log_target)
        self.steps, self.ids, self.lts, self.ncand, self.times = [], [], [], [], []
        if self.record:
            self.push(0, walker, 0)

    def hit(self, lt: float) -> bool:
        return self.target is not None and lt >= self.target - TARGET_TOL

    def push(self, step, walker, n_candidates, sid=None):
        self.steps.append(step)
        self.ids.append(walker.state_id() if sid is None else sid)
        self.lts.append(walker.log_target)
        self.ncand.append(n_candidates)
        self.times.append(time.perf_counter() - self.t0)

    def update(self, step, walker) -> bool:
        lt = walker.log_target
        if lt > self.best:
            self.best = lt
            self.best_state = walker.snapshot()
            self.best_step = step
        if self.hit(lt):
            self.reached = True
        return self.reached

    def finish(self, model, walker, evaluations, iterations, initial_lt, eval_to_target):
        return OptTrace(
            best_state=self.best_state,
            best_log_target=float(self.best),
            best_value=float(model.value(self.best_state)),
            steps_to_best=self.best_step,
            evaluations=evaluations,
            iterations_run=iterations,
            wall_time=time.perf_counter() - self.t0,
            initial_log_target=initial_lt,
            reached_target=self.reached,
            evaluations_to_target=eval_to_target,
            steps=self.steps, state_ids=self.ids, log_targets=self.lts,
            n_candidates=self.ncand, wall_times=self.times,
        )


def _setup(model: ProblemModel, config: OptRunConfig, rng, initial_state):
    stream = as_stream(rng)
    if initial_state is None:
        initial_state = model.initial_state(stream.child(Purpose.INIT).gen, config.init)
    walker = model.start(initial_state)
    iters = config.iterations
    temps = temperatures(config.schedule.with_steps(iters), iters).tolist() if iters else []
    return stream, walker, temps


def run_sa(model: ProblemModel, config: OptRunConfig, rng: RngStream | int | None = None,
           initial_state=None) -> OptTrace:
    """Simulated annealing: one proposal per step, accepted with
    ``min{1, [pi(Y)/pi(X)]^(1/T(k))}``."""
    if config.algorithm is not Algorithm.SA:
        raise ConfigurationError("run_sa needs algorithm SA")
    t0 = time.perf_counter()
    stream, walker, temps = _setup(model, config, rng, initial_state)
    iters = config.iterations
    prop = stream.child(Purpose.PROPOSAL).gen
    log_u = np.log(stream.child(Purpose.ACCEPT).gen.random(iters)).tolist()
    tracker = _Tracker(walker, config, t0)
    initial_lt = walker.log_target
    record = tracker.record
    continuous = not model.discrete

    if continuous:
        rs = prop.integers(0, model.n, size=iters).tolist()
        ss = prop.normal(0.0, model.step_sigma, size=iters).tolist()
    else:
        us = prop.random(iters).tolist()

    done = tracker.reached
    k = 0
    eval_to_target = 0 if done else None
    sid = walker.state_id() if record else None
    while k < iters and not done:
        cur = walker.log_target
        if continuous:
            y, ly = walker.candidate(rs[k], ss[k])
        else:
            i = walker.propose(us[k])
            ly = walker.neighbor_log_target(i)
        k += 1
        if ly != -math.inf and log_u[k - 1] < (ly - cur) / temps[k - 1]:
            if continuous:
                walker.move_to(y, ly)
            else:
                walker.move(i)
            done = tracker.update(k, walker)
            if record:
                sid = walker.state_id()
            if done:
                eval_to_target = k
        if record:
            tracker.push(k, walker, 1, sid)
    return tracker.finish(model, walker, k, k, initial_lt, eval_to_target)


def _jump_loop(model: ProblemModel, config: OptRunConfig, rng, initial_state,
               mode: Algorithm) -> OptTrace:
    t0 = time.perf_counter()
    stream, walker, temps = _setup(model, config, rng, initial_state)
    iters = config.iterations
    pick_u = stream.child(Purpose.ACCEPT).gen.random(iters).tolist()
    tracker = _Tracker(walker, config, t0)
    initial_lt = walker.log_target
    record = tracker.record
    uniform_q = model.symmetric_proposal and getattr(walker, "uniform_proposal", True)

    sampler = None
    if mode is Algorithm.PNS:
        sampler = PartialNeighborSampler(config.pns, walker.n_neighbors,
                                         stream.child(Purpose.SUBSET).gen)
    tabu = deque(maxlen=config.tabu_length) if mode is Algorithm.TABU and config.tabu_length else None

    evaluations = 0
    eval_to_target = 0 if tracker.reached else None
    k = 0
    while k < iters and not tracker.reached:
        temp = temps[k]
        cur = walker.log_target
        if sampler is not None:
            idx = sampler.draw(k)
        elif tabu:
            banned = {walker.index_of(s) for s in tabu}
            banned.discard(None)
            idx = np.array([i for i in range(walker.n_neighbors) if i not in banned], dtype=np.int64)
        else:
            idx = None

        for attempt in range(SUBSET_RETRIES if sampler is not None else 1):
            lt = walker.neighbor_log_targets(idx)
            lw = (lt - cur) / temp
            np.minimum(lw, 0.0, out=lw)
            if not uniform_q:
                lw += walker.log_proposal(idx)
            evaluations += walker.n_neighbors if mode is Algorithm.TABU else len(lw)
            try:
                j = pick_index(lw, pick_u[k])
                break
            except EmptySupportError:
                if sampler is not None:
                    idx = sampler.redraw()
        else:
            raise AbsorbingStateError(
                f"every candidate is infeasible at step {k} from state {walker.state_id()}")

        if tabu is not None:
            tabu.append(walker.snapshot())
        walker.move(j if idx is None else int(idx[j]))
        k += 1
        if tracker.update(k, walker) and eval_to_target is None:
            eval_to_target = evaluations
        if record:
            tracker.push(k, walker, len(lw))
    return tracker.finish(model, walker, evaluations, k, initial_lt, eval_to_target)


def _continuous_pns(model, config: OptRunConfig, rng, initial_state) -> OptTrace:
    t0 = time.perf_counter()
    stream, walker, temps = _setup(model, config, rng, initial_state)
    iters = config.iterations
    pairs = max(1, config.pns.candidates // 2)
    sub = stream.child(Purpose.SUBSET).gen
    rs = sub.integers(0, model.n, size=(iters, pairs))
    ss = sub.normal(0.0, model.step_sigma, size=(iters, pairs))
    pick_u = stream.child(Purpose.ACCEPT).gen.random(iters).tolist()
    tracker = _Tracker(walker, config, t0)
    initial_lt = walker.log_target
    evaluations = 0
    eval_to_target = 0 if tracker.reached else None
    k = 0
    while k < iters and not tracker.reached:
        temp = temps[k]
        cur = walker.log_target
        r, s = rs[k], ss[k]
        for attempt in range(SUBSET_RETRIES):
            ys, lt = walker.candidate_pairs(r, s)
            evaluations += len(lt)
            lw = (lt - cur) / temp
            np.minimum(lw, 0.0, out=lw)
            try:
                j = pick_index(lw, pick_u[k])
                break
            except EmptySupportError:
                r = sub.integers(0, model.n, size=pairs)
                s = sub.normal(0.0, model.step_sigma, size=pairs)
        else:
            raise AbsorbingStateError(f"no feasible candidate at step {k}")
        walker.move_to(ys[j], float(lt[j]))
        k += 1
        if tracker.update(k, walker) and eval_to_target is None:
            eval_to_target = evaluations
        if tracker.record:
            tracker.push(k, walker, len(lw))
    return tracker.finish(model, walker, evaluations, k, initial_lt, eval_to_target)


def jump_log_weights(walker, temp: float, idx=None) -> np.ndarray:
    """Unnormalised log jump weights ``log Q(X,Y) + log min{1, [pi(Y)/pi(X)]^(1/T)}``
    over the neighbours ``idx`` (all when None), as used by RF, PNS and tabu."""
    lt = walker.neighbor_log_targets(idx)
    with np.errstate(invalid="ignore"):
        lw = np.minimum((lt - walker.log_target) / temp, 0.0)
    lw[lt == -np.inf] = -np.inf
    return lw + walker.log_proposal(idx)


def jump_probabilities(model: ProblemModel, state, temp: float = 1.0) -> np.ndarray:
    """Normalised rejection-free jump distribution over the neighbours of ``state``."""
    lw = jump_log_weights(model.start(state), temp)
    top = lw.max()
    if top == -np.inf:
        raise AbsorbingStateError("state has no feasible neighbour")
    w = np.exp(lw - top)
    return w / w.sum()


def _require_discrete(model, name):
    if not model.discrete:
        raise ConfigurationError(f"{name} needs a finite neighbourhood; use PNS or SA")


def run_rf(model: ProblemModel, config: OptRunConfig, rng: RngStream | int | None = None,
           initial_state=None) -> OptTrace:
    """Rejection-free optimisation over the full neighbourhood."""
    if config.algorithm is not Algorithm.RF:
        raise ConfigurationError("run_rf needs algorithm RF")
    _require_discrete(model, "rejection-free")
    return _jump_loop(model, config, rng, initial_state, Algorithm.RF)


def run_pns(model: ProblemModel, config: OptRunConfig, rng: RngStream | int | None = None,
            initial_state=None) -> OptTrace:
    """Partial neighbour search: rejection-free moves within a partial neighbour set."""
    if config.algorithm is not Algorithm.PNS:
        raise ConfigurationError("run_pns needs algorithm PNS")
    if not model.discrete:
        return _continuous_pns(model, config, rng, initial_state)
    return _jump_loop(model, config, rng, initial_state, Algorithm.PNS)


def run_tabu_rf(model: ProblemModel, config: OptRunConfig, rng: RngStream | int | None = None,
                initial_state=None) -> OptTrace:
    """Rejection-free with the previous ``L`` jump states removed from the candidates."""
    if config.algorithm is not Algorithm.TABU:
        raise ConfigurationError("run_tabu_rf needs algorithm TABU")
    _require_discrete(model, "tabu rejection-free")
    return _jump_loop(model, config, rng, initial_state, Algorithm.TABU)


_DRIVERS = {Algorithm.SA: run_sa, Algorithm.RF: run_rf, Algorithm.PNS: run_pns,
            Algorithm.TABU: run_tabu_rf}


def run_optimizer(model: ProblemModel, config: OptRunConfig, rng: RngStream | int | None = None,
                  initial_state=None) -> OptTrace:
    return _DRIVERS[config.algorithm](model, config, rng, initial_state)


def write_trace_csv(path, trace: OptTrace, timing: bool = False) -> None:
    """Write ``step, state_id, log_target, n_candidates, wall_time_cumulative``.

    Wall times are left blank unless ``timing`` is set, so that reruns with
    the same seed produce identical files.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "state_id", "log_target", "n_candidates", "wall_time_cumulative"])
        for step, sid, lt, nc, wt in zip(trace.steps, trace.state_ids, trace.log_targets,
                                         trace.n_candidates, trace.wall_times):
            out.writerow([step, sid, repr(float(lt)), nc, f"{wt:.6f}" if timing else ""])
