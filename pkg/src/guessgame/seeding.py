"""Deterministic seed fan-out.

A single master seed drives every random choice in the package. Component
seeds are derived by hashing ``master:name:index...`` with SHA-256 and taking
the first 8 bytes, so any component stream can be reconstructed from the
master seed alone (no mutable RNG state needs to be checkpointed; a resumed
run re-derives the same streams from its epoch counter).
"""

import hashlib

import numpy as np

__all__ = ["derive_seed", "rng_for"]


def derive_seed(master: int, name: str, *indices: int) -> int:
    """Derive a 63-bit component seed from the master seed and a key path."""
    key = ":".join([str(int(master)), name, *[str(int(i)) for i in indices]])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def rng_for(master: int, name: str, *indices: int) -> np.random.Generator:
    """Seeded generator for one component stream."""
    return np.random.default_rng(derive_seed(master, name, *indices))
