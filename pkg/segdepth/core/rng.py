"""Reproducible random streams.

Every consumer (a dataset sample, an augmentation draw, a parameter tensor)
gets its own child stream derived from a text label, so results do not depend
on the order in which consumers ask for random numbers.
"""
import zlib

import numpy as np


def _label_key(label: str) -> int:
    # crc32 is stable across platforms and Python hash seeds
    return zlib.crc32(label.encode("utf-8"))


class Rng:
    """Seed-derived counter-based random stream.

    Wraps :py:class:`numpy.random.Generator` over the Philox counter-based
    bit generator.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        assert seed >= 0, f"Seed must be non-negative, got {seed}"
        self.seed = seed
        self.path = path
        sequence = np.random.SeedSequence(seed, spawn_key=path)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def __repr__(self):
        return f"<Rng seed:{self.seed} path:{self.path}>"

    def child(self, label: str) -> "Rng":
        """Derive an independent stream for a named consumer."""
        return Rng(self.seed, self.path + (_label_key(label),))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def random(self, size=None):
        return self.generator.random(size)
