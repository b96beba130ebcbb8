"""Per-item random streams derived from a global seed.

Every randomized step draws from a generator keyed on (seed, purpose,
item key), so results do not depend on processing order or sharding.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *key: object) -> int:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode())
    for part in key:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def keyed_rng(seed: int, *key: object) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *key)))
