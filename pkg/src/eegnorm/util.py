"""Seeding helpers shared across modules.

Every stochastic component derives its generator from `stable_seed`, which
hashes its arguments with SHA-256.  Unlike Python's builtin `hash`, the result
is stable across processes and interpreter runs, so regenerating a dataset or
rerunning a grid cell is order- and worker-independent.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_seed(*parts: object) -> int:
    """Derive a 64-bit seed from an arbitrary tuple of printable parts."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(*parts: object) -> np.random.Generator:
    """A fresh PCG64 generator keyed by `parts`."""
    return np.random.default_rng(stable_seed(*parts))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
