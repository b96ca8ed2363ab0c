"""
Counter-based random streams.

A master seed fans out into independent blocks of paths. Block ``b`` draws from
``Philox`` keyed by ``SeedSequence(seed, spawn_key=(b,))``, so a path's draws
depend only on (seed, block, lane) and never on the thread that runs it.
"""
from typing import Iterator, Tuple

import numpy as np


class RngStreams:
    def __init__(self, seed: int, block_size: int = 512):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        if block_size <= 0:
            raise ValueError("block_size must be positive")
        self.seed = int(seed)
        self.block_size = int(block_size)

    def block(self, block_index: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(int(block_index),))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, tag: int) -> "RngStreams":
        # Independent family for a later stage of a multi-stage sampler
        mixed = np.random.SeedSequence(self.seed, spawn_key=(2**31 + int(tag),)).generate_state(1, dtype=np.uint64)[0]
        return RngStreams(seed=int(mixed % (2**63)), block_size=self.block_size)

    def blocks(self, n: int) -> Iterator[Tuple[int, int, int]]:
        """
        Yields (block_index, start, stop) covering n paths.
        """
        for block_index, start in enumerate(range(0, n, self.block_size)):
            yield block_index, start, min(start + self.block_size, n)
