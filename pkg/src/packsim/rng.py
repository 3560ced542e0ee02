"""Deterministic 64-bit random streams.

All simulation randomness flows through SplitMix64 streams derived from a
master seed plus integer identifiers, so replications and server pools are
independent and every run is reproducible.  The compiled simulation core
implements the identical recurrence on C uint64, which keeps the two
backends bit-for-bit interchangeable.
"""

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit scramble."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *ids: int) -> int:
    """Fold integer identifiers into a master seed to get a stream seed."""
    s = mix64(master & _MASK)
    for x in ids:
        s = mix64((s + _GOLDEN * ((x & _MASK) + 1)) & _MASK)
    return s


class SplitMix64:
    """Counter-style generator; one instance per (pool, purpose) stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return mix64(self.state)

    def u01(self) -> float:
        # Strictly inside (0, 1): safe for log().
        return (float(self.next_u64() >> 11) + 0.5) * 2.0**-53

    def exponential(self, rate: float) -> float:
        return -math.log(self.u01()) / rate

    def pick(self, n: int) -> int:
        """Uniform index in [0, n)."""
        i = int(self.u01() * n)
        return n - 1 if i >= n else i
