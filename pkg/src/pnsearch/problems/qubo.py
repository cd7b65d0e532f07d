"""Quadratic unconstrained binary optimisation, maximise ``x^T Q x``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CacheConsistencyError
from .base import BinaryModel, BitFlipWalker


@dataclass(frozen=True, eq=False)
class QuboInstance:
    n: int
    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (self.n, self.n):
            raise ValueError(f"Q must be {self.n}x{self.n}, got {q.shape}")
        if np.any(np.tril(q, -1) != 0):
            raise ValueError("Q must be upper triangular")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)


def generate_qubo(n: int, rng: np.random.Generator, sigma: float = 100.0,
                  with_diagonal: bool = True) -> QuboInstance:
    """Upper-triangular Q with i.i.d. Normal(0, sigma^2) entries on i <= j.

    ``with_diagonal=False`` leaves the diagonal at zero (entries on i < j only).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    q = np.zeros((n, n))
    rows, cols = np.triu_indices(n, 0 if with_diagonal else 1)
    q[rows, cols] = rng.normal(0.0, sigma, size=len(rows))
    return QuboInstance(n, q)


def qubo_log_target(inst: QuboInstance, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"expected a vector of length {inst.n}, got shape {x.shape}")
    return float(x @ inst.q @ x)


def _coupling(q: np.ndarray) -> np.ndarray:
    s = q + q.T
    np.fill_diagonal(s, 0.0)
    return s


def qubo_gains(inst: QuboInstance, x) -> np.ndarray:
    """Change in ``x^T Q x`` from flipping each bit of ``x``."""
    x = np.asarray(x, dtype=float)
    field = np.diag(inst.q) + _coupling(inst.q) @ x
    return (1.0 - 2.0 * x) * field


def qubo_flip_delta(inst: QuboInstance, x, i: int, gains: np.ndarray,
                    check: bool = False) -> float:
    """``f(x with bit i flipped) - f(x)`` read from a cached gain vector.

    With ``check=True`` the cache is compared with a fresh recomputation
    and a :class:`CacheConsistencyError` is raised on mismatch.
    """
    if check:
        fresh = qubo_gains(inst, x)
        if not np.allclose(fresh, gains, rtol=1e-9, atol=1e-7):
            raise CacheConsistencyError("gain cache is stale for the given state")
    return float(gains[i])


class QuboWalker(BitFlipWalker):
    def __init__(self, model: "QuboModel", x):
        x = np.asarray(x, dtype=np.uint8)
        super().__init__(x, qubo_log_target(model.instance, x))
        self._diag = model.diag
        self._coupling = model.coupling
        self.field = self._diag + self._coupling @ x.astype(float)
        self.sign = 1.0 - 2.0 * x
        self.gains = self.sign * self.field

    def neighbor_log_targets(self, idx=None):
        if idx is None:
            return self.log_target + self.gains
        return self.log_target + self.gains[idx]

    def neighbor_log_target(self, i: int) -> float:
        return self.log_target + float(self.gains[i])

    def move(self, i: int) -> None:
        self.log_target += float(self.gains[i])
        x = self.state
        x[i] ^= 1
        if x[i]:
            self.field += self._coupling[i]
        else:
            self.field -= self._coupling[i]
        self.sign[i] = -self.sign[i]
        np.multiply(self.sign, self.field, out=self.gains)


class QuboModel(BinaryModel):
    kind = "qubo"

    def __init__(self, instance: QuboInstance):
        self.instance = instance
        self.n = instance.n
        self.diag = np.diag(instance.q).copy()
        self.coupling = _coupling(instance.q)

    def log_target(self, state) -> float:
        return qubo_log_target(self.instance, self._check(state))

    def walker(self, state) -> QuboWalker:
        return QuboWalker(self, self._check(state))

    def brute_force(self) -> tuple[float, np.ndarray]:
        """Exhaustive maximum over all ``2^n`` states (small ``n`` only)."""
        if self.n > 22:
            raise ValueError("brute force is limited to n <= 22")
        best, arg = -np.inf, None
        chunk = 1 << min(self.n, 14)
        for start in range(0, 1 << self.n, chunk):
            codes = np.arange(start, start + chunk)
            xs = ((codes[:, None] >> np.arange(self.n)) & 1).astype(float)
            vals = np.einsum("ki,ij,kj->k", xs, self.instance.q, xs)
            k = int(np.argmax(vals))
            if vals[k] > best:
                best, arg = float(vals[k]), xs[k].astype(np.uint8)
        return best, arg
