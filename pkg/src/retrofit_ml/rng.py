"""Seed derivation.

Every random stream in the package is a numpy ``Generator`` over the PCG64
bit generator. Child streams are derived from a root 64-bit seed with
``SeedSequence(entropy=root, spawn_key=path)``, where ``path`` is a tuple of
non-negative integers (string labels are mapped through CRC-32). Because a
child depends only on ``(root, path)`` and never on how many siblings were
drawn before it, work split across threads reproduces the serial result.
"""
from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"seed path components must be non-negative, got {part}")
    return int(part)


def seed_sequence(seed: int, *path: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed) & MASK64, spawn_key=tuple(_key(p) for p in path))


def make_rng(seed: int, *path: int | str) -> np.random.Generator:
    """PCG64 generator for the stream at ``path`` under ``seed``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))


def derive_seed(seed: int, *path: int | str) -> int:
    """64-bit child seed for the stream at ``path`` under ``seed``."""
    state = seed_sequence(seed, *path).generate_state(1, dtype=np.uint64)
    return int(state[0])
