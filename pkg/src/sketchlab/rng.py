"""Deterministic random streams used by every sampling path in the package.

All randomness flows through :class:`RngStream`, a thin wrapper around
numpy's counter-based Philox generator.  Philox output is identical
across platforms and numpy releases for a fixed seed, so descriptors,
experiment reports, and test fixtures reproduce bit for bit.

Normal variates come from numpy's ziggurat sampler; the exact sampling
algorithm is pinned by :data:`ALGORITHM_ID` and must not change without
a version bump, since stored seeds would silently stop reproducing.
"""

from __future__ import annotations

import numpy as np

ALGORITHM_ID = "philox4x64-10/numpy-seedseq/ziggurat-normal"

MASK64 = (1 << 64) - 1


def derive_seed(seed: int, index: int) -> int:
    """Seed for an indexed sub-task (trial seeds are base xor index)."""
    return (int(seed) ^ int(index)) & MASK64


class RngStream:
    """A single-consumer stream of reproducible random values.

    Parameters
    ----------
    seed:
        64-bit unsigned seed.  Equal seeds give equal sample sequences.
    """

    algorithm_id = ALGORITHM_ID

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
        self.seed = int(seed) & MASK64
        self.generator = np.random.Generator(np.random.Philox(self.seed))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"

    def spawn_seed(self) -> int:
        """Draw a fresh 63-bit seed for a dependent object.

        Construction order is part of the documented sampling order: a
        multiplier built from a stream records the spawned seed in its
        descriptor so the rebuild never re-consumes this stream.
        """
        return int(self.generator.integers(0, 1 << 63))

    def child(self) -> "RngStream":
        return RngStream(self.spawn_seed())

    # -- primitive draws used by the multiplier families ---------------

    def normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def signs(self, n: int) -> np.ndarray:
        """n values from {-1.0, +1.0}, each sign with probability 0.5."""
        return self.generator.integers(0, 2, size=n) * 2.0 - 1.0

    def unit_modulus(self, n: int) -> np.ndarray:
        """n complex values uniform on the unit circle."""
        return np.exp(2j * np.pi * self.generator.random(n))

    def choice_without_replacement(self, n: int, q: int) -> np.ndarray:
        return self.generator.choice(n, size=q, replace=False)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size=size)

    def uniform(self, low: float, high: float, size=None):
        return self.generator.uniform(low, high, size=size)


def as_stream(rng) -> RngStream:
    """Coerce an int seed or an existing stream into an RngStream."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(
        f"expected an int seed or RngStream, got {type(rng).__name__}"
    )
