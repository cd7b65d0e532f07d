"""Sampling chains: Metropolis-Hastings and the rejection-free jump chain.

A Metropolis run ``X_0, X_1, ...`` and a rejection-free run describe the
same process: collapsing repeated states of the former gives jump states
``J_k`` with holding times ``M_k``, and the latter draws those directly,
``J_{k+1}`` proportional to the transition probabilities out of ``J_k``
and ``M_k = 1 + Geometric(p)`` with ``p`` the total escape probability.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (CoolingSchedule, Purpose, RngStream, as_stream, pick_index,
                   sample_multiplicity, temperatures)
from .errors import AbsorbingStateError
from .problems.base import ProblemModel

__all__ = [
    "ChainTrace",
    "JumpChainRecord",
    "run_metropolis",
    "run_rejection_free_sampling",
    "jump_collapse",
    "weighted_expectation",
    "write_chain_csv",
]


@dataclass
class ChainTrace:
    states: list[str]
    log_targets: np.ndarray

    def __len__(self):
        return len(self.states)


@dataclass
class JumpChainRecord:
    jump_states: list[str]
    multiplicities: np.ndarray
    escape_probs: np.ndarray | None = None
    log_targets: np.ndarray | None = None
    final_state: str | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.jump_states)


def _schedule_temps(schedule: CoolingSchedule | None, steps: int) -> np.ndarray:
    if schedule is None:
        return np.ones(steps)
    return temperatures(schedule.with_steps(steps), steps)


def run_metropolis(model: ProblemModel, steps: int, schedule: CoolingSchedule | None = None,
                   rng: RngStream | int | None = None, hastings: bool = True,
                   initial_state=None) -> ChainTrace:
    """Propose from ``Q``, accept with ``min{1, ratio}``; return all ``steps + 1`` states.

    The ratio is ``[pi(Y)/pi(X)]^(1/T)``, times ``Q(Y,X)/Q(X,Y)`` when
    ``hastings`` is set and the proposal is not symmetric. ``hastings=False``
    with any schedule is plain simulated annealing.
    """
    stream = as_stream(rng)
    if initial_state is None:
        initial_state = model.initial_state()
    walker = model.start(initial_state)
    temps = _schedule_temps(schedule, steps).tolist()
    u_prop = stream.child(Purpose.PROPOSAL).gen.random(steps).tolist()
    log_u = np.log(stream.child(Purpose.ACCEPT).gen.random(steps)).tolist()
    correct = hastings and not model.symmetric_proposal

    cur_id = walker.state_id()
    states = [cur_id]
    lts = [walker.log_target]
    for k in range(steps):
        i = walker.propose(u_prop[k])
        ly = walker.neighbor_log_target(i)
        if ly != -math.inf:
            la = (ly - walker.log_target) / temps[k]
            if correct:
                idx = np.array([i])
                la += float(walker.log_reverse_proposal(idx)[0] - walker.log_proposal(idx)[0])
            if log_u[k] < la:
                walker.move(i)
                cur_id = walker.state_id()
        states.append(cur_id)
        lts.append(walker.log_target)
    return ChainTrace(states, np.asarray(lts))


def _transition_log_weights(walker, correct: bool) -> np.ndarray:
    """``log P(Y | X)`` for every neighbour Y: proposal times M-H acceptance."""
    lt = walker.neighbor_log_targets()
    fwd = walker.log_proposal()
    with np.errstate(invalid="ignore"):
        ratio = lt - walker.log_target
        if correct:
            ratio = ratio + walker.log_reverse_proposal() - fwd
        acc = np.minimum(ratio, 0.0)
    acc[lt == -np.inf] = -np.inf
    return fwd + acc


def run_rejection_free_sampling(model: ProblemModel, jumps: int,
                                rng: RngStream | int | None = None,
                                initial_state=None) -> JumpChainRecord:
    """Draw ``jumps`` jump states with their multiplicities, never rejecting.

    ``escape_probs[k]`` is the total probability of leaving ``J_k``; the
    state reached after the last jump is kept in ``final_state``.
    """
    stream = as_stream(rng)
    if initial_state is None:
        initial_state = model.initial_state()
    walker = model.start(initial_state)
    pick_u = stream.child(Purpose.ACCEPT).gen.random(jumps).tolist()
    mult_rng = stream.child(Purpose.MULTIPLICITY).gen
    correct = not model.symmetric_proposal

    states, lts, mults, escapes = [], [], [], []
    for k in range(jumps):
        lw = _transition_log_weights(walker, correct)
        p = float(np.exp(lw).sum())
        if p <= 0.0:
            raise AbsorbingStateError(f"state {walker.state_id()} has no way out")
        p = min(p, 1.0)
        states.append(walker.state_id())
        lts.append(walker.log_target)
        escapes.append(p)
        mults.append(sample_multiplicity(p, mult_rng))
        walker.move(pick_index(lw, pick_u[k]))
    return JumpChainRecord(states, np.asarray(mults, dtype=np.int64), np.asarray(escapes),
                           np.asarray(lts), final_state=walker.state_id())


def jump_collapse(trace: ChainTrace | list) -> JumpChainRecord:
    """Merge immediate repeats; multiplicities are the run lengths."""
    states = trace.states if isinstance(trace, ChainTrace) else list(trace)
    lts = trace.log_targets if isinstance(trace, ChainTrace) else None
    if not states:
        raise ValueError("cannot collapse an empty trace")
    jumps, mults, keep = [states[0]], [1], [0]
    for k in range(1, len(states)):
        if states[k] == jumps[-1]:
            mults[-1] += 1
        else:
            jumps.append(states[k])
            mults.append(1)
            keep.append(k)
    return JumpChainRecord(jumps, np.asarray(mults, dtype=np.int64), None,
                           None if lts is None else np.asarray(lts)[keep])


def weighted_expectation(record: JumpChainRecord, h: Callable[[str], float]) -> float:
    """``sum M_k h(J_k) / sum M_k``."""
    if len(record) == 0:
        raise ValueError("empty jump chain")
    m = np.asarray(record.multiplicities, dtype=float)
    hv = np.array([h(s) for s in record.jump_states], dtype=float)
    return float(m @ hv / m.sum())


def write_chain_csv(path, chain: ChainTrace | JumpChainRecord) -> None:
    """Rows of ``step, state_id, log_target, multiplicity``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "state_id", "log_target", "multiplicity"])
        if isinstance(chain, ChainTrace):
            for k, (s, lt) in enumerate(zip(chain.states, chain.log_targets)):
                out.writerow([k, s, repr(float(lt)), 1])
        else:
            lts = chain.log_targets if chain.log_targets is not None else [""] * len(chain)
            for k, (s, lt, m) in enumerate(zip(chain.jump_states, lts, chain.multiplicities)):
                out.writerow([k, s, repr(float(lt)) if lt != "" else "", int(m)])
