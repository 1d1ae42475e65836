"""Deterministic seed derivation."""

import hashlib

import numpy as np

Seed = int | np.random.SeedSequence


def as_seed_sequence(seed: Seed) -> np.random.SeedSequence:
    """Fresh SeedSequence, so spawning from it never depends on earlier spawns."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=seed.spawn_key)
    return np.random.SeedSequence(seed)


def derive_seed(master_seed: int, *parts: object) -> int:
    """Stable 63-bit seed from the master seed and an identifying tuple."""
    key = "/".join([str(master_seed), *(str(p) for p in parts)])
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
