"""0-1 knapsack with target ``pi(x) = 1(w.x <= W) * v.x``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import BinaryModel, BitFlipWalker

# log target of the empty knapsack: pi = 0 there, but it is feasible and
# must stay a valid current state. Any positive-value move beats it with
# acceptance 1 and moves back into it carry weight exp(-huge) = 0.
EMPTY_LOG_TARGET = -1e300


@dataclass(frozen=True, eq=False)
class KnapsackInstance:
    n: int
    capacity: float
    weights: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        v = np.array(self.values, dtype=float)
        if w.shape != (self.n,) or v.shape != (self.n,):
            raise ValueError("weights and values must both have length n")
        if not (self.capacity > 0 and np.all(w > 0) and np.all(v > 0)):
            raise ValueError("capacity, weights and values must be positive")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", v)


def generate_knapsack(n: int, capacity: float, rng: np.random.Generator,
                      mean: float = 1000.0) -> KnapsackInstance:
    """Weights and values i.i.d. Poisson(mean); zero draws are redrawn."""
    if n < 1:
        raise ValueError("n must be >= 1")

    def draw():
        out = rng.poisson(mean, size=n)
        while np.any(out == 0):
            bad = out == 0
            out[bad] = rng.poisson(mean, size=int(bad.sum()))
        return out

    w = draw()
    v = draw()
    return KnapsackInstance(n, float(capacity), w, v)


def _log_value(total_weight, total_value, capacity):
    with np.errstate(divide="ignore"):
        out = np.log(np.maximum(total_value, 0.0))
    out = np.where(total_value == 0, EMPTY_LOG_TARGET, out)
    return np.where(total_weight > capacity, -np.inf, out)


def _exp_value(total_weight, total_value, capacity):
    return np.where(total_weight > capacity, -np.inf, np.asarray(total_value, dtype=float))


TARGET_FORMS = ("linear", "exponential")


def knapsack_log_target(inst: KnapsackInstance, x, form: str = "linear") -> float:
    """``log pi(x)`` with ``pi = 1(w.x <= W) * v.x`` (linear) or ``exp(v.x)`` (exponential)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"expected a vector of length {inst.n}, got shape {x.shape}")
    fn = _exp_value if form == "exponential" else _log_value
    return float(fn(inst.weights @ x, inst.values @ x, inst.capacity))


class KnapsackWalker(BitFlipWalker):
    def __init__(self, model: "KnapsackModel", x):
        inst = model.instance
        x = np.asarray(x, dtype=np.uint8)
        self._w, self._v, self._cap = inst.weights, inst.values, inst.capacity
        self._exp = model.target == "exponential"
        self._fn = _exp_value if self._exp else _log_value
        self.total_weight = float(self._w @ x)
        self.total_value = float(self._v @ x)
        super().__init__(x, float(self._fn(self.total_weight, self.total_value, self._cap)))

    def neighbor_log_targets(self, idx=None):
        sign = 1.0 - 2.0 * (self.state if idx is None else self.state[idx])
        w = self._w if idx is None else self._w[idx]
        v = self._v if idx is None else self._v[idx]
        return self._fn(self.total_weight + sign * w, self.total_value + sign * v, self._cap)

    def neighbor_log_target(self, i: int) -> float:
        sign = -1.0 if self.state[i] else 1.0
        tw = self.total_weight + sign * self._w[i]
        if tw > self._cap:
            return -math.inf
        tv = self.total_value + sign * self._v[i]
        if self._exp:
            return float(tv)
        return EMPTY_LOG_TARGET if tv == 0 else math.log(tv)

    def move(self, i: int) -> None:
        sign = -1.0 if self.state[i] else 1.0
        self.state[i] ^= 1
        self.total_weight += sign * self._w[i]
        self.total_value += sign * self._v[i]
        self.log_target = float(self._fn(self.total_weight, self.total_value, self._cap))


class KnapsackModel(BinaryModel):
    """Knapsack target on ``{0,1}^n``.

    ``target="linear"`` uses ``pi = v.x`` on the feasible set, so moves compare
    value ratios. ``target="exponential"`` uses ``log pi = v.x``, the same
    convention as the QUBO and simplex models, so moves compare value
    differences.
    """

    kind = "knapsack"

    def __init__(self, instance: KnapsackInstance, target: str = "linear"):
        if target not in TARGET_FORMS:
            raise ValueError(f"knapsack target must be one of {TARGET_FORMS}, got {target!r}")
        self.instance = instance
        self.n = instance.n
        self.target = target

    def log_target(self, state) -> float:
        return knapsack_log_target(self.instance, self._check(state), self.target)

    def value(self, state) -> float:
        x = np.asarray(state, dtype=float)
        if self.instance.weights @ x > self.instance.capacity:
            return 0.0
        return float(self.instance.values @ x)

    def feasible(self, state) -> bool:
        return bool(self.instance.weights @ np.asarray(state, dtype=float) <= self.instance.capacity)

    def walker(self, state) -> KnapsackWalker:
        return KnapsackWalker(self, self._check(state))
