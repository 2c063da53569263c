"""Reproducible random streams keyed by (master seed, task kind, task index).

Every stream is a Philox counter-based generator seeded from a ``SeedSequence``
whose spawn key encodes the task, so results never depend on the order in
which parallel tasks are scheduled.
"""
from __future__ import annotations

import zlib

import numpy as np


def _kind_key(kind: str) -> int:
    return zlib.crc32(kind.encode("utf-8"))


def stream(master_seed: int, kind: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(_kind_key(kind), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def substream_seed(master_seed: int, kind: str, index: int = 0) -> int:
    """A 63-bit integer seed for a task, for echoing into records."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(_kind_key(kind), int(index)))
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64) @ np.array([1, 2**32], dtype=np.uint64)) & (2**63 - 1)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(0 if rng is None else int(rng), "default")
