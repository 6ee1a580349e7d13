"""Counter-based, splittable random streams.

Every stochastic component in the package draws from an :class:`RngStream`
identified by ``(seed, stream_id)``.  Identical identifiers produce identical
draw sequences on every platform (Philox is a pure counter-based generator),
and distinct stream ids are statistically independent, so actor threads,
environments and experiment seeds can all be given their own stream without
coordination.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # Finalizer from the splitmix64 generator; bijective on 64-bit ints.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _mix(*parts: int) -> int:
    acc = 0
    for p in parts:
        acc = _splitmix64(acc ^ (p & _MASK64))
    return acc


class RngStream:
    """A named, reproducible random stream.

    ``generator()`` hands out a fresh :class:`numpy.random.Generator` seeded
    purely by ``(seed, stream_id)``; calling it twice yields two generators
    that produce the same sequence.  ``substream`` derives an independent
    child stream deterministically, which is how the harness fans out one
    run seed to many actors, environments, and evaluation games.
    """

    __slots__ = ("seed", "stream_id")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed & _MASK64
        self.stream_id = stream_id & _MASK64

    def substream(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, _mix(self.stream_id, *ids))

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RngStream)
            and self.seed == other.seed
            and self.stream_id == other.stream_id
        )

    def __hash__(self) -> int:
        return hash((self.seed, self.stream_id))
