"""Quadratic programming on the open probability simplex.

Moves rescale the whole vector: coordinate ``r`` shifts by ``s`` and every
other coordinate is multiplied by ``(1 - x_r) / (1 - y_r)``, which keeps
the coordinate sum at one. The move with ``-s`` is its exact inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import ProblemModel

RENORMALIZE_EVERY = 1000


@dataclass(frozen=True, eq=False)
class SimplexQpInstance:
    n: int
    q: np.ndarray
    step_sigma: float = 0.1

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (self.n, self.n):
            raise ValueError(f"Q must be {self.n}x{self.n}, got {q.shape}")
        if np.any(np.tril(q, -1) != 0):
            raise ValueError("Q must be upper triangular")
        if not self.step_sigma > 0:
            raise ValueError("step_sigma must be positive")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)


def generate_simplex_qp(n: int, rng: np.random.Generator, sigma: float = 100.0,
                        step_sigma: float = 0.1) -> SimplexQpInstance:
    q = np.zeros((n, n))
    rows, cols = np.triu_indices(n)
    q[rows, cols] = rng.normal(0.0, sigma, size=len(rows))
    return SimplexQpInstance(n, q, step_sigma)


def simplex_log_target(inst: SimplexQpInstance, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"expected a vector of length {inst.n}, got shape {x.shape}")
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        return -math.inf
    return float(x @ inst.q @ x)


def simplex_move(x: np.ndarray, r: int, s: float) -> np.ndarray | None:
    """Shift coordinate ``r`` by ``s`` and rescale the rest; None if ``y_r`` leaves (0, 1)."""
    yr = x[r] + s
    if not 0.0 < yr < 1.0:
        return None
    y = x * ((1.0 - yr) / (1.0 - x[r]))
    y[r] = yr
    return y


def simplex_propose(inst: SimplexQpInstance, x, rng: np.random.Generator):
    """One random ``(r, s)`` and its mirrored pair ``(y, y')``.

    Either element is None when its coordinate ``r`` falls outside (0, 1);
    such candidates carry ``log pi = -inf``.
    """
    x = np.asarray(x, dtype=float)
    r = int(rng.integers(inst.n))
    s = float(rng.normal(0.0, inst.step_sigma))
    return simplex_move(x, r, s), simplex_move(x, r, -s)


class SimplexWalker:
    """Cursor for the continuous model; candidates are generated, not enumerated."""

    def __init__(self, model: "SimplexQpModel", x):
        self.model = model
        self.state = np.array(x, dtype=float)
        self.log_target = model.log_target(self.state)
        self._accepted = 0

    def candidate(self, r: int, s: float):
        y = simplex_move(self.state, r, s)
        if y is None:
            return None, -math.inf
        return y, float(y @ self.model.q @ y)

    def candidate_pairs(self, rs: np.ndarray, ss: np.ndarray):
        """Stacked candidates for ``(r_k, +s_k)`` and ``(r_k, -s_k)``, interleaved.

        Returns ``(states, log_targets)`` with infeasible rows set to ``-inf``.
        """
        x = self.state
        r = np.repeat(rs, 2)
        s = np.empty(2 * len(ss))
        s[0::2], s[1::2] = ss, -ss
        xr = x[r]
        yr = xr + s
        ok = (yr > 0.0) & (yr < 1.0)
        scale = np.where(ok, (1.0 - yr) / (1.0 - xr), 1.0)
        ys = x[None, :] * scale[:, None]
        ys[np.arange(len(r)), r] = np.where(ok, yr, xr)
        lt = np.einsum("ki,ij,kj->k", ys, self.model.q, ys)
        lt[~ok] = -np.inf
        return ys, lt

    def move_to(self, y: np.ndarray, log_target: float) -> None:
        self.state = y
        self._accepted += 1
        if self._accepted % RENORMALIZE_EVERY == 0:
            self.state = self.state / self.state.sum()
            self.log_target = float(self.state @ self.model.q @ self.state)
        else:
            self.log_target = log_target

    def state_id(self) -> str:
        return self.model.encode(self.state)

    def snapshot(self) -> np.ndarray:
        return self.state.copy()


class SimplexQpModel(ProblemModel):
    """``log pi(x) = x^T Q x`` on the open simplex, ``-inf`` elsewhere."""

    kind = "simplexqp"
    discrete = False

    def __init__(self, instance: SimplexQpInstance):
        self.instance = instance
        self.n = instance.n
        self.q = instance.q
        self.step_sigma = instance.step_sigma

    def initial_state(self, rng=None, mode="default"):
        if mode in ("default", "center"):
            return np.full(self.n, 1.0 / self.n)
        if mode == "random":
            if rng is None:
                raise ValueError("random initialisation needs a generator")
            return rng.dirichlet(np.ones(self.n))
        raise ValueError(f"unknown initial-state mode {mode!r}")

    def log_target(self, state) -> float:
        return simplex_log_target(self.instance, state)

    def walker(self, state) -> SimplexWalker:
        return SimplexWalker(self, state)

    def encode(self, state) -> str:
        return ";".join(repr(float(v)) for v in np.asarray(state))

    def decode(self, text: str) -> np.ndarray:
        return np.array([float(v) for v in text.split(";")])
