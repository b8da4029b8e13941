"""Per-replication random streams derived from a single base seed.

A stream is identified by ``(base_seed, index, tag, *extra)`` and built from
``numpy.random.SeedSequence(base_seed, spawn_key=(index, tag_code, *extra))``.
SeedSequence hashes the whole tuple, so distinct keys give independent,
reproducible streams regardless of the order in which they are requested.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TAGS = {"covariates": 0, "events": 1, "response": 2}


@dataclass(frozen=True)
class SeedDerivation:
    base_seed: int

    def __post_init__(self):
        if not (0 <= int(self.base_seed) < 2**64):
            raise ValueError("base_seed must be an unsigned 64-bit integer")

    def sequence(self, index: int, tag: str, *extra: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.base_seed),
                                      spawn_key=(int(index), TAGS[tag], *map(int, extra)))

    def seed(self, index: int, tag: str, *extra: int) -> int:
        """The derived 64-bit seed for a stream (for logging and records)."""
        return int(self.sequence(index, tag, *extra).generate_state(1, np.uint64)[0])

    def rng(self, index: int, tag: str, *extra: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.sequence(index, tag, *extra)))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
