"""Seed derivation.

All randomness descends from one master seed through labeled paths, e.g.
``derive_rng(seed, "simlab", "outcomes", truth, r)``. String labels are
hashed with a fixed digest so the mapping is stable across processes and
Python versions (``hash()`` is salted per process and cannot be used).
"""
import hashlib

import numpy as np


def _label_to_int(label):
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"negative seed component: {label}")
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(master_seed, *path):
    entropy = _label_to_int(master_seed)
    return np.random.SeedSequence(entropy, spawn_key=tuple(_label_to_int(p) for p in path))


def derive_rng(master_seed, *path):
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, *path)))


def derive_seed(master_seed, *path):
    """A 63-bit integer seed for APIs that take plain ints."""
    state = seed_sequence(master_seed, *path).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 32 | int(state[1])) & ((1 << 63) - 1))
