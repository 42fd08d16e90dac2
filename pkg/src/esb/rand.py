"""Seedable random streams shared by generators, heuristics and separation.

All randomness flows through PCG64 generators derived from a user seed plus a
short purpose tag.  Stream-splitting rule: the tags are serialized with repr,
CRC32-hashed to 32-bit words, and used as the spawn key of a SeedSequence
rooted at the seed.  A component can therefore be replayed in isolation:
``stream(seed, "er", n, p)`` yields the same generator on every platform and
regardless of what else consumed randomness before it.
"""

import zlib

import numpy as np


def stream(seed, *tags):
    """Return a PCG64 generator for the given seed and purpose tags."""
    key = tuple(zlib.crc32(repr(t).encode()) for t in tags)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
