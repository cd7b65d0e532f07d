"""Numerical primitives shared by every chain.

Targets are always carried as ``log pi``; a state with ``pi = 0`` has log
target ``-inf`` and is treated as a zero-weight candidate rather than an
error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, EmptySupportError, InvalidStateError

__all__ = [
    "CoolingSchedule",
    "ScheduleKind",
    "RngStream",
    "Purpose",
    "temperature_at",
    "temperatures",
    "log_acceptance",
    "categorical_pick",
    "pick_index",
    "sample_multiplicity",
    "derive_seed",
    "splitmix64",
]

MASK64 = (1 << 64) - 1


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    GEOMETRIC = "geometric"


@dataclass(frozen=True)
class CoolingSchedule:
    """Temperature trajectory ``T(k)`` for ``k = 0 .. total_steps - 1``.

    Geometric schedules interpolate exponentially between ``t_start`` and
    ``t_end`` so that the first step runs at ``t_start`` and the last at
    ``t_end``.
    """

    kind: ScheduleKind
    t_start: float
    t_end: float
    total_steps: int

    def __post_init__(self):
        kind = ScheduleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.t_start > 0 and self.t_end > 0):
            raise ConfigurationError("temperatures must be positive")
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ConfigurationError("temperatures must be finite")
        if self.total_steps < 1:
            raise ConfigurationError("total_steps must be >= 1")
        if kind is ScheduleKind.CONSTANT and self.t_start != self.t_end:
            raise ConfigurationError("constant schedule needs t_start == t_end")
        if kind is ScheduleKind.GEOMETRIC:
            if self.total_steps < 2:
                raise ConfigurationError("geometric schedule needs total_steps >= 2")
            if self.t_start < self.t_end:
                raise ConfigurationError("cooling schedules must be non-increasing")

    @classmethod
    def constant(cls, temp: float, total_steps: int = 1) -> "CoolingSchedule":
        return cls(ScheduleKind.CONSTANT, temp, temp, max(int(total_steps), 1))

    @classmethod
    def geometric(cls, t_start: float, t_end: float, total_steps: int) -> "CoolingSchedule":
        return cls(ScheduleKind.GEOMETRIC, t_start, t_end, int(total_steps))

    @classmethod
    def parse(cls, text: str, total_steps: int = 1) -> "CoolingSchedule":
        """Parse ``constant:<T>`` or ``geometric:<T0>:<T1>``."""
        parts = text.strip().split(":")
        try:
            if parts[0] == "constant" and len(parts) == 2:
                return cls.constant(float(parts[1]), total_steps)
            if parts[0] == "geometric" and len(parts) == 3:
                return cls.geometric(float(parts[1]), float(parts[2]), max(total_steps, 2))
        except ValueError as exc:
            raise ConfigurationError(f"bad schedule {text!r}: {exc}") from None
        raise ConfigurationError(
            f"bad schedule {text!r}; expected constant:<T> or geometric:<T0>:<T1>"
        )

    def with_steps(self, total_steps: int) -> "CoolingSchedule":
        """Same trajectory shape stretched over ``total_steps`` steps."""
        if self.kind is ScheduleKind.GEOMETRIC:
            return CoolingSchedule.geometric(self.t_start, self.t_end, max(total_steps, 2))
        return CoolingSchedule.constant(self.t_start, max(total_steps, 1))

    @property
    def label(self) -> str:
        if self.kind is ScheduleKind.CONSTANT:
            return f"constant:{self.t_start:g}"
        return f"geometric:{self.t_start:g}:{self.t_end:g}"


def temperature_at(schedule: CoolingSchedule, k: int) -> float:
    if not 0 <= k < schedule.total_steps:
        raise IndexError(f"step {k} outside schedule of {schedule.total_steps} steps")
    if schedule.kind is ScheduleKind.CONSTANT:
        return schedule.t_start
    if k == schedule.total_steps - 1:
        return schedule.t_end
    frac = k / (schedule.total_steps - 1)
    return schedule.t_start * (schedule.t_end / schedule.t_start) ** frac


def temperatures(schedule: CoolingSchedule, steps: int | None = None) -> np.ndarray:
    """Vector of ``T(k)`` for the first ``steps`` steps of ``schedule``."""
    n = schedule.total_steps if steps is None else steps
    if n > schedule.total_steps:
        raise IndexError("requested more temperatures than the schedule holds")
    if schedule.kind is ScheduleKind.CONSTANT:
        return np.full(n, schedule.t_start)
    frac = np.arange(n) / (schedule.total_steps - 1)
    out = schedule.t_start * (schedule.t_end / schedule.t_start) ** frac
    if n == schedule.total_steps:
        out[-1] = schedule.t_end
    return out


def log_acceptance(log_pi_x: float, log_pi_y: float, temp: float) -> float:
    """``log min{1, (pi(y)/pi(x))**(1/temp)}``."""
    if log_pi_x == -math.inf:
        raise InvalidStateError("current state has zero target mass")
    if log_pi_y == -math.inf:
        return -math.inf
    return min(0.0, (log_pi_y - log_pi_x) / temp)


def pick_index(log_weights: np.ndarray, u: float) -> int:
    """Inverse-CDF selection from unnormalised log weights with a given uniform."""
    if len(log_weights) <= _SMALL:
        return _pick_small(log_weights.tolist(), u)
    top = log_weights.max()
    if top == -np.inf or np.isnan(top):
        raise EmptySupportError("all candidate weights are zero")
    w = np.exp(log_weights - top)
    c = np.cumsum(w)
    i = int(np.searchsorted(c, u * c[-1], side="right"))
    # u * total can round up onto the last cumulative value
    if i >= len(c):
        i = int(np.flatnonzero(w)[-1])
    return i


_SMALL = 24


def _pick_small(lw: list, u: float) -> int:
    top = max(lw) if lw else -math.inf
    if top == -math.inf or top != top:
        raise EmptySupportError("all candidate weights are zero")
    exp = math.exp
    w = [exp(v - top) for v in lw]
    target = u * sum(w)
    acc = 0.0
    last = 0
    for i, wi in enumerate(w):
        if wi > 0.0:
            acc += wi
            last = i
            if acc > target:
                return i
    return last


def categorical_pick(log_weights: Sequence[float], rng: "RngStream | np.random.Generator") -> int:
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise EmptySupportError("no candidates to pick from")
    gen = rng.gen if isinstance(rng, RngStream) else rng
    return pick_index(lw, gen.random())


def sample_multiplicity(p: float, rng: "RngStream | np.random.Generator") -> int:
    """Holding time ``1 + G`` with ``G ~ Geometric(p)`` on ``{0, 1, ...}``."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"escape probability must lie in (0, 1], got {p}")
    if p == 1.0:
        return 1
    gen = rng.gen if isinstance(rng, RngStream) else rng
    # numpy counts trials up to and including the first success, i.e. 1 + G
    return int(gen.geometric(p))


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, *keys: int) -> int:
    """Mix ``base_seed`` with integer keys into an independent 64-bit seed.

    Each key is folded in separately, so seeds for repetition ``r`` never
    depend on how many repetitions exist.
    """
    h = splitmix64(base_seed & MASK64)
    for key in keys:
        h = splitmix64(h ^ (key & MASK64))
    return h


class Purpose:
    """Stream identifiers for the per-run RNG split."""

    PROPOSAL = 1
    SUBSET = 2
    ACCEPT = 3
    INIT = 4
    MULTIPLICITY = 5


class RngStream:
    """A reproducible random stream keyed by ``(seed, stream_id)``."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, purpose: int) -> "RngStream":
        return RngStream(self.seed, derive_seed(self.stream_id, purpose))

    def random(self, size=None):
        return self.gen.random(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def as_stream(rng: "RngStream | int | None") -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(np.random.SeedSequence().entropy & MASK64)
    return RngStream(int(rng))
