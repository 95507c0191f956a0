"""Named sub-seed derivation and counter-based uniform streams.

Every random quantity in the package is a pure function of (seed, label, index),
so runs are reproducible and shards can be evaluated in any order.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def sub_seed(seed: int, label: str, index: int = 0) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed & MASK64).to_bytes(8, "little"))
    h.update(label.encode())
    h.update(int(index).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def uniform64(seed: int, label: str, index: int = 0) -> int:
    """A uniform 64-bit integer; divide by 2**64 for a dyadic point of [0, 1)."""
    return sub_seed(seed, label, index)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z += np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def counter_uniforms(seed: int, label: str, start: int, count: int) -> np.ndarray:
    """Float64 uniforms in [0, 1) for counters start, ..., start + count - 1."""
    key = np.uint64(sub_seed(seed, label))
    idx = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = splitmix64(idx ^ splitmix64(np.array([key], dtype=np.uint64))[0])
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
