"""Deterministic random streams.

Every consumer of randomness asks for a stream keyed by
``(master seed, purpose tag, *indices)``. The tag is hashed with CRC-32 so
keys are stable across processes and Python versions; the key is fed to
numpy's ``SeedSequence`` and a PCG64 generator. Streams with different keys
are statistically independent, so units of work can run in any order or
in parallel without changing results.
"""

import zlib

import numpy as np


def stream(seed: int, tag: str, *indices: int) -> np.random.Generator:
    key = [int(seed) & 0xFFFFFFFF, zlib.crc32(tag.encode("utf-8"))]
    key.extend(int(i) & 0xFFFFFFFF for i in indices)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def derive_seed(seed: int, tag: str, *indices: int) -> int:
    """A 32-bit child seed, for APIs that take an integer seed."""
    return int(stream(seed, tag, *indices).integers(0, 2**32 - 1))
