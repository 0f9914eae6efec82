"""Per-party random streams derived from a master seed.

The derivation is fixed so any trial can be replayed alone::

    SeedSequence(entropy=master_seed, spawn_key=(trial, crc32(label)))

feeding a PCG64 generator. Each party draws from its own stream, so adding
an adversary (stream ``"eve"``) never shifts an honest party's draws.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed_sequence(master_seed: int, trial: int, label: str) -> np.random.SeedSequence:
    if master_seed < 0 or trial < 0:
        raise ValueError("master_seed and trial must be non-negative")
    return np.random.SeedSequence(
        entropy=master_seed, spawn_key=(trial, zlib.crc32(label.encode("utf-8")))
    )


def derive_rng(master_seed: int, trial: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(master_seed, trial, label)))


class Streams:
    """Lazily created, cached generators keyed by party label."""

    def __init__(self, master_seed: int, trial: int = 0, prefix: str = ""):
        self.master_seed = master_seed
        self.trial = trial
        self.prefix = prefix
        self._cache: dict[str, np.random.Generator] = {}

    def __getitem__(self, label: str) -> np.random.Generator:
        if label not in self._cache:
            self._cache[label] = derive_rng(self.master_seed, self.trial, self.prefix + label)
        return self._cache[label]

    def child(self, prefix: str) -> Streams:
        """Independent family of streams for a nested sub-protocol."""
        return Streams(self.master_seed, self.trial, self.prefix + prefix)
