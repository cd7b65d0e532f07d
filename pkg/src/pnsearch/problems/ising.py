"""Planted 3-body Ising instances built from mod-2 linear systems (3R3XOR).

Each row of an invertible binary matrix ``A`` with exactly three ones
becomes one cubic clause ``(-1)^b_i s_a s_b s_c``. With spins
``s = 1 - 2x`` the energy equals ``n - 2 F(x)`` where ``F`` counts
violated equations, so the solution of ``A x = b (mod 2)`` is the unique
maximiser with energy ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GenerationError
from .base import BinaryModel, BitFlipWalker


def gf2_solve(a, b) -> np.ndarray | None:
    """Solve ``a x = b`` over GF(2) by Gauss-Jordan elimination.

    Returns the unique solution, or ``None`` when ``a`` is singular.
    """
    a = np.asarray(a, dtype=np.uint8) & 1
    b = np.asarray(b, dtype=np.uint8) & 1
    n, m = a.shape
    if n != m or b.shape != (n,):
        raise ValueError("gf2_solve needs a square system")
    aug = np.concatenate([a, b[:, None]], axis=1)
    for col in range(n):
        pivots = np.flatnonzero(aug[col:, col]) + col
        if len(pivots) == 0:
            return None
        p = pivots[0]
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        rows = np.flatnonzero(aug[:, col])
        rows = rows[rows != col]
        aug[rows] ^= aug[col]
    return aug[:, n].copy()


@dataclass(frozen=True, eq=False)
class IsingXorInstance:
    n: int
    clauses: np.ndarray        # (m, 3) sorted index triples
    coefficients: np.ndarray   # (m,) entries in {-1, +1}
    planted: np.ndarray        # spins in {-1, +1}
    a_matrix: np.ndarray       # (n, n) binary, three ones per row
    b_vector: np.ndarray       # (n,) binary
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, dtype in (("clauses", np.int64), ("coefficients", np.int64),
                            ("planted", np.int64), ("a_matrix", np.uint8),
                            ("b_vector", np.uint8)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def planted_bits(self) -> np.ndarray:
        return ((1 - self.planted) // 2).astype(np.uint8)


def _clauses_from_rows(a: np.ndarray, b: np.ndarray):
    coef: dict[tuple, int] = {}
    for i in range(a.shape[0]):
        triple = tuple(int(j) for j in np.flatnonzero(a[i]))
        coef[triple] = coef.get(triple, 0) + (-1 if b[i] else 1)
    # duplicated rows make A singular, so accumulation is a formality here
    items = [(t, c) for t, c in coef.items() if c != 0]
    clauses = np.array([t for t, _ in items], dtype=np.int64).reshape(-1, 3)
    coefficients = np.array([c for _, c in items], dtype=np.int64)
    return clauses, coefficients


def generate_3r3xor(n: int, rng: np.random.Generator, max_tries: int = 1000) -> IsingXorInstance:
    """Random planted instance: rows are uniform 3-subsets, A invertible over GF(2)."""
    if n < 3:
        raise ValueError("3R3XOR needs n >= 3")
    for attempt in range(1, max_tries + 1):
        a = np.zeros((n, n), dtype=np.uint8)
        for i in range(n):
            a[i, rng.choice(n, size=3, replace=False)] = 1
        b = rng.integers(0, 2, size=n, dtype=np.uint8)
        x = gf2_solve(a, b)
        if x is None:
            continue
        clauses, coefficients = _clauses_from_rows(a, b)
        planted = 1 - 2 * x.astype(np.int64)
        return IsingXorInstance(n, clauses, coefficients, planted, a, b,
                                meta={"attempts": attempt})
    raise GenerationError(f"no invertible 3-per-row matrix found in {max_tries} tries (n={n})")


def count_violations(inst: IsingXorInstance, x) -> int:
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (inst.n,):
        raise ValueError(f"expected a vector of length {inst.n}, got shape {x.shape}")
    lhs = (inst.a_matrix.astype(np.int64) @ x) % 2
    return int(np.sum(lhs != inst.b_vector))


def ising_energy(inst: IsingXorInstance, s) -> float:
    s = np.asarray(s)
    if s.shape != (inst.n,):
        raise ValueError(f"expected a vector of length {inst.n}, got shape {s.shape}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be +1 or -1")
    s = s.astype(np.int64)
    c = inst.clauses
    return float(np.sum(inst.coefficients * s[c[:, 0]] * s[c[:, 1]] * s[c[:, 2]]))


class IsingWalker(BitFlipWalker):
    """Bit ``x_j = 1`` encodes spin ``s_j = -1``."""

    def __init__(self, model: "IsingXorModel", x):
        x = np.asarray(x, dtype=np.uint8)
        self._inc = model.incidence
        self._members = model.members
        c = model.instance.clauses
        s = 1.0 - 2.0 * x
        self.clause_vals = model.instance.coefficients * s[c[:, 0]] * s[c[:, 1]] * s[c[:, 2]]
        super().__init__(x, float(self.clause_vals.sum()))
        self.deltas = -2.0 * (self._inc @ self.clause_vals)

    def neighbor_log_targets(self, idx=None):
        if idx is None:
            return self.log_target + self.deltas
        return self.log_target + self.deltas[idx]

    def neighbor_log_target(self, i: int) -> float:
        return self.log_target + float(self.deltas[i])

    def move(self, i: int) -> None:
        self.log_target += float(self.deltas[i])
        self.state[i] ^= 1
        self.clause_vals[self._members[i]] *= -1.0
        self.deltas = -2.0 * (self._inc @ self.clause_vals)


class IsingXorModel(BinaryModel):
    """``log pi(x) = H(1 - 2x)``; the optimum is ``n`` at the planted state."""

    kind = "ising3xor"

    def __init__(self, instance: IsingXorInstance):
        self.instance = instance
        self.n = instance.n
        m = len(instance.clauses)
        inc = np.zeros((self.n, m))
        for k, triple in enumerate(instance.clauses):
            inc[triple, k] = 1.0
        self.incidence = inc
        self.members = [np.flatnonzero(inc[j]) for j in range(self.n)]
        self.optimum = float(self.n)

    def log_target(self, state) -> float:
        x = self._check(state)
        return ising_energy(self.instance, 1 - 2 * x.astype(np.int64))

    def walker(self, state) -> IsingWalker:
        return IsingWalker(self, self._check(state))

    def brute_force(self) -> tuple[np.ndarray, np.ndarray]:
        """Energies of all ``2^n`` states and the codes attaining the maximum."""
        if self.n > 20:
            raise ValueError("brute force is limited to n <= 20")
        codes = np.arange(1 << self.n)
        s = 1 - 2 * ((codes[:, None] >> np.arange(self.n)) & 1)
        c = self.instance.clauses
        h = (self.instance.coefficients * s[:, c[:, 0]] * s[:, c[:, 1]] * s[:, c[:, 2]]).sum(axis=1)
        return h, codes[h == h.max()]
