"""Deterministic random streams.

Every stream is a numpy ``Generator`` over PCG64, seeded from a
``SeedSequence`` built from the integer seed plus a CRC-32 of a purpose
tag.  PCG64 and SeedSequence are specified bit-for-bit by numpy, so the
same ``(seed, tag)`` yields the same draws on every platform.
"""

import zlib

import numpy as np


def tag_key(tag):
    """Map a purpose tag (str, int, or tuple of those) to a list of uint32 words."""
    if isinstance(tag, tuple):
        words = []
        for part in tag:
            words.extend(tag_key(part))
        return words
    if isinstance(tag, (int, np.integer)):
        value = int(tag)
        if value < 0:
            raise ValueError("integer tags must be non-negative")
        words = []
        while True:
            words.append(value & 0xFFFFFFFF)
            value >>= 32
            if not value:
                return words
    return [zlib.crc32(str(tag).encode("utf-8"))]


def make_rng(seed, tag=None):
    """Return an independent generator for ``(seed, tag)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    entropy = [int(seed)]
    if tag is not None:
        entropy.extend(tag_key(tag))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def child_seed(rng):
    """Draw a fresh 63-bit seed from ``rng`` for handing to a sub-component."""
    return int(rng.integers(0, 2**63 - 1))
