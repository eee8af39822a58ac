class ConfigError(ValueError):
    """Malformed source/scheme descriptor or command configuration."""


class SourceExhausted(RuntimeError):
    """A finite source ran out of bits.

    ``k_reached`` is filled in by the sampler: the last sample index that
    was fully observed before the source ran dry.
    """

    def __init__(self, requested, available, position, k_reached=None):
        self.requested = requested
        self.available = available
        self.position = position
        self.k_reached = k_reached
        msg = f"source exhausted at bit {position}: needed {requested}, had {available}"
        if k_reached is not None:
            msg += f" (last complete sample k={k_reached})"
        super().__init__(msg)


class OracleMismatch(AssertionError):
    def __init__(self, n, m, exact, brute):
        self.n, self.m = n, m
        super().__init__(f"partition formula {exact} != enumeration {brute} at n={n}, m={m}")
