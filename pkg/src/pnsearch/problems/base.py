"""Problem-model interface used by every sampler and optimizer.

A :class:`ProblemModel` is immutable and describes the target and the
neighbourhood structure. Chains never touch it directly during a run;
they ask it for a :class:`Walker`, a single-owner cursor holding the
current state together with whatever cache makes neighbour evaluation
cheap.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from ..errors import InvalidStateError


class Walker(ABC):
    """Mutable cursor over a discrete neighbourhood.

    Neighbours of the current state are addressed by position
    ``0 .. n_neighbors - 1``; the order is fixed for a given state.
    """

    state: object
    log_target: float

    @property
    @abstractmethod
    def n_neighbors(self) -> int: ...

    @abstractmethod
    def neighbor_log_targets(self, idx: np.ndarray | None = None) -> np.ndarray:
        """``log pi`` of the selected (default: all) neighbours."""

    def neighbor_log_target(self, i: int) -> float:
        return float(self.neighbor_log_targets(np.array([i]))[0])

    @abstractmethod
    def log_proposal(self, idx: np.ndarray | None = None) -> np.ndarray:
        """Forward proposal ``log Q(X, Y_i)``."""

    def log_reverse_proposal(self, idx: np.ndarray | None = None) -> np.ndarray:
        """Reverse proposal ``log Q(Y_i, X)``; equal to the forward one when symmetric."""
        return self.log_proposal(idx)

    @abstractmethod
    def propose(self, u: float) -> int:
        """Draw a neighbour index from ``Q(X, .)`` using one uniform variate."""

    @abstractmethod
    def move(self, i: int) -> None: ...

    @abstractmethod
    def neighbor_state(self, i: int): ...

    @abstractmethod
    def index_of(self, state) -> int | None:
        """Position of ``state`` among the current neighbours, or None."""

    @abstractmethod
    def state_id(self) -> str: ...

    @abstractmethod
    def snapshot(self):
        """An independent copy of the current state."""


class ProblemModel(ABC):
    """A target ``pi`` on a state space with a proposal neighbourhood."""

    kind: str = "abstract"
    discrete: bool = True
    symmetric_proposal: bool = True

    @abstractmethod
    def initial_state(self, rng: np.random.Generator | None = None, mode: str = "default"): ...

    @abstractmethod
    def log_target(self, state) -> float: ...

    def value(self, state) -> float:
        """Natural objective reported in summaries (defaults to ``log pi``)."""
        return self.log_target(state)

    @abstractmethod
    def walker(self, state) -> Walker: ...

    @abstractmethod
    def encode(self, state) -> str: ...

    def start(self, state) -> Walker:
        w = self.walker(state)
        if w.log_target == -math.inf:
            raise InvalidStateError("initial state is infeasible")
        return w

    def neighbors(self, state) -> list:
        w = self.walker(state)
        return [w.neighbor_state(i) for i in range(w.n_neighbors)]


def bits_to_str(x: np.ndarray) -> str:
    return (x.astype(np.uint8) + 48).tobytes().decode("ascii")


def str_to_bits(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - 48


class BitFlipWalker(Walker):
    """Hamming-distance-1 neighbourhood with uniform proposal ``1/n``."""

    def __init__(self, x: np.ndarray, log_target: float):
        self.state = np.array(x, dtype=np.uint8)
        self.n = len(self.state)
        self.log_target = float(log_target)
        self._logq = -math.log(self.n)

    @property
    def n_neighbors(self) -> int:
        return self.n

    def log_proposal(self, idx=None):
        size = self.n if idx is None else len(idx)
        return np.full(size, self._logq)

    def propose(self, u: float) -> int:
        return min(int(u * self.n), self.n - 1)

    def neighbor_state(self, i: int) -> np.ndarray:
        y = self.state.copy()
        y[i] ^= 1
        return y

    def index_of(self, state) -> int | None:
        diff = np.flatnonzero(self.state != state)
        return int(diff[0]) if len(diff) == 1 else None

    def state_id(self) -> str:
        return bits_to_str(self.state)

    def snapshot(self) -> np.ndarray:
        return self.state.copy()


class BinaryModel(ProblemModel):
    """Shared plumbing for models over ``{0,1}^n``."""

    n: int

    def initial_state(self, rng=None, mode="default"):
        if mode in ("default", "zeros"):
            return np.zeros(self.n, dtype=np.uint8)
        if mode == "random":
            if rng is None:
                raise ValueError("random initialisation needs a generator")
            return rng.integers(0, 2, size=self.n, dtype=np.uint8)
        raise ValueError(f"unknown initial-state mode {mode!r}")

    def encode(self, state) -> str:
        return bits_to_str(np.asarray(state))

    def decode(self, text: str) -> np.ndarray:
        return str_to_bits(text).copy()

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {x.shape}")
        return x
