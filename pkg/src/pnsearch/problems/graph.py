"""Explicit finite state graphs, including the two-hub local-maximum toy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .base import ProblemModel, Walker


class GraphWalker(Walker):
    def __init__(self, model: "GraphModel", node: int):
        self.model = model
        self.state = int(node)
        self.log_target = float(model.log_pi[self.state])
        self._sync()

    def _sync(self):
        m = self.model
        self._adj = m.adjacency[self.state]
        self._logq = m.log_q[self.state]
        self._cdf = m.cum_q[self.state]

    @property
    def n_neighbors(self) -> int:
        return len(self._adj)

    def neighbor_log_targets(self, idx=None):
        nodes = self._adj if idx is None else self._adj[idx]
        return self.model.log_pi[nodes]

    def neighbor_log_target(self, i: int) -> float:
        return float(self.model.log_pi[self._adj[i]])

    def log_proposal(self, idx=None):
        return self._logq if idx is None else self._logq[idx]

    def log_reverse_proposal(self, idx=None):
        m = self.model
        nodes = self._adj if idx is None else self._adj[idx]
        return np.array([m.log_q[y][m.position[y][self.state]] for y in nodes])

    def propose(self, u: float) -> int:
        i = int(np.searchsorted(self._cdf, u, side="right"))
        return min(i, len(self._adj) - 1)

    def move(self, i: int) -> None:
        self.state = int(self._adj[i])
        self.log_target = float(self.model.log_pi[self.state])
        self._sync()

    def neighbor_state(self, i: int) -> int:
        return int(self._adj[i])

    def index_of(self, state) -> int | None:
        return self.model.position[self.state].get(int(state))

    def state_id(self) -> str:
        return self.model.labels[self.state]

    def snapshot(self) -> int:
        return self.state


class GraphModel(ProblemModel):
    """Target ``pi`` on the nodes of a graph; proposals move along edges.

    ``proposal`` optionally gives, per node, the proposal probabilities of
    its neighbours in adjacency order; the default is uniform.
    """

    kind = "graph"

    def __init__(self, adjacency: Sequence[Sequence[int]], log_pi: Sequence[float],
                 labels: Sequence[str] | None = None, initial: int = 0,
                 proposal: Sequence[Sequence[float]] | None = None):
        self.adjacency = [np.asarray(a, dtype=np.int64) for a in adjacency]
        self.log_pi = np.asarray(log_pi, dtype=float)
        n = len(self.adjacency)
        if self.log_pi.shape != (n,):
            raise ValueError("log_pi must have one entry per node")
        if any(len(a) == 0 for a in self.adjacency):
            raise ValueError("every node needs at least one neighbour")
        self.labels = list(labels) if labels is not None else [str(i) for i in range(n)]
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        self.initial = int(initial)
        self.position = [{int(y): k for k, y in enumerate(a)} for a in self.adjacency]
        if proposal is None:
            probs = [np.full(len(a), 1.0 / len(a)) for a in self.adjacency]
        else:
            probs = [np.asarray(p, dtype=float) / np.sum(p) for p in proposal]
        self.q = probs
        self.log_q = [np.log(p) for p in probs]
        self.cum_q = [np.cumsum(p) for p in probs]
        self.n_states = n
        self.symmetric_proposal = all(
            math.isclose(self.q[x][k], self.q[y][self.position[y][x]])
            if x in self.position[y] else False
            for x in range(n) for k, y in enumerate(self.adjacency[x]))

    def initial_state(self, rng=None, mode="default"):
        if mode == "default":
            return self.initial
        if mode == "random":
            return int(rng.integers(self.n_states))
        raise ValueError(f"unknown initial-state mode {mode!r}")

    def log_target(self, state) -> float:
        return float(self.log_pi[int(state)])

    def walker(self, state) -> GraphWalker:
        return GraphWalker(self, state)

    def encode(self, state) -> str:
        return self.labels[int(state)]

    def decode(self, text: str) -> int:
        return self.index[text]

    def node(self, label: str) -> int:
        return self.index[label]

    def stationary(self) -> np.ndarray:
        """Normalised ``pi`` over all nodes."""
        p = np.exp(self.log_pi - self.log_pi.max())
        return p / p.sum()

    def metropolis_kernel(self, temp: float = 1.0, hastings: bool = True) -> np.ndarray:
        """Exact one-step transition matrix of the Metropolis chain at ``temp``."""
        n = self.n_states
        p = np.zeros((n, n))
        for x in range(n):
            for k, y in enumerate(self.adjacency[x]):
                ratio = (self.log_pi[y] - self.log_pi[x]) / temp
                if hastings:
                    back = self.log_q[y][self.position[y][x]]
                    ratio += back - self.log_q[x][k]
                p[x, y] += self.q[x][k] * math.exp(min(0.0, ratio))
            p[x, x] += 1.0 - p[x].sum()
        return p


@dataclass(frozen=True)
class ToyLocalMaxInstance:
    n: int
    pi_hub: float = 100.0
    pi_spoke: float = 0.01


def toy_local_max(n: int, pi_hub: float = 100.0, pi_spoke: float = 0.01) -> GraphModel:
    """Hubs A, B joined by an edge; A has spokes A1..An, B has spokes B1..Bn.

    Node order: A, B, A1..An, B1..Bn. The chain starts at A.
    """
    inst = ToyLocalMaxInstance(n, pi_hub, pi_spoke)
    a, b = 0, 1
    spokes_a = list(range(2, 2 + n))
    spokes_b = list(range(2 + n, 2 + 2 * n))
    adjacency = [[b] + spokes_a, [a] + spokes_b]
    adjacency += [[a] for _ in spokes_a] + [[b] for _ in spokes_b]
    log_pi = [math.log(pi_hub)] * 2 + [math.log(pi_spoke)] * (2 * n)
    labels = ["A", "B"] + [f"A{i}" for i in range(1, n + 1)] + [f"B{i}" for i in range(1, n + 1)]
    model = GraphModel(adjacency, log_pi, labels, initial=a)
    model.toy = inst
    return model


def complete_graph_model(pi: Sequence[float], labels: Sequence[str] | None = None) -> GraphModel:
    """Every node proposes every other node uniformly (a symmetric proposal)."""
    n = len(pi)
    adjacency = [[y for y in range(n) if y != x] for x in range(n)]
    return GraphModel(adjacency, np.log(np.asarray(pi, dtype=float)), labels)
