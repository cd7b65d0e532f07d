"""Exception types raised by the chains, problems and harness."""


class PnsError(Exception):
    """Base class for all library errors."""


class ConfigurationError(PnsError, ValueError):
    """An algorithm, schedule or strategy was configured inconsistently."""


class InvalidStateError(PnsError, ValueError):
    """The current state of a chain has zero target mass (log target = -inf)."""


class EmptySupportError(PnsError, ValueError):
    """Every candidate weight is zero; nothing can be selected."""


class AbsorbingStateError(PnsError, RuntimeError):
    """A chain reached a state with no feasible move out of it."""


class GenerationError(PnsError, RuntimeError):
    """A random instance generator exhausted its retry budget."""


class CacheConsistencyError(PnsError, AssertionError):
    """An incremental evaluation cache disagrees with a full recomputation."""
