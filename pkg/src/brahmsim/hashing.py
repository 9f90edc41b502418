"""64-bit keyed hashing and deterministic RNG stream derivation.

Every random decision in a simulation run is drawn from a generator derived
from (master seed, node id, round, phase), so results are reproducible and
independent of the order in which nodes are processed.

The keyed hash is a splitmix64-style finalizer with the seed folded into the
state. It is avalanche-quality but not cryptographic, which is all the
min-wise samplers need.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# Phase tags for RNG stream derivation.
PHASE_BOOT = 0
PHASE_PUSH = 1
PHASE_PULL = 2
PHASE_RENEW = 3
PHASE_ADVERSARY = 4
PHASE_IDENT = 5

# Pseudo node id for system-wide (not per-node) streams.
SYSTEM_NODE = -1


def mix64(x: int) -> int:
    """splitmix64 finalizer over a 64-bit integer."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _M1) & MASK64
    x ^= x >> 27
    x = (x * _M2) & MASK64
    x ^= x >> 31
    return x


def keyed_hash(seed: int, value: int) -> int:
    """Keyed 64-bit hash of `value` under `seed`."""
    return mix64((value & MASK64) ^ mix64((seed + GOLDEN) & MASK64))


def keyed_hash_matrix(seeds: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Vectorized keyed_hash: returns a (len(seeds), len(values)) uint64 matrix."""
    s = _mix64_array((seeds.astype(np.uint64) + np.uint64(GOLDEN)))
    x = values.astype(np.uint64)[None, :] ^ s[:, None]
    return _mix64_array(x)


def _mix64_array(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_M1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_M2)
    x ^= x >> np.uint64(31)
    return x


def derive_seed(*parts: int) -> int:
    """Fold integer labels into one well-mixed 64-bit seed."""
    # mix64 inlined: this runs a few times per node per round.
    acc = mix64(len(parts) + GOLDEN)
    for p in parts:
        x = (int(p) + GOLDEN) & MASK64
        x ^= x >> 30
        x = (x * _M1) & MASK64
        x ^= x >> 27
        x = (x * _M2) & MASK64
        x ^= x >> 31
        x ^= acc
        x ^= x >> 30
        x = (x * _M1) & MASK64
        x ^= x >> 27
        x = (x * _M2) & MASK64
        acc = x ^ (x >> 31)
    return acc


def derive_rng(master_seed: int, node: int, round_index: int, phase: int) -> np.random.Generator:
    """Independent generator for one (node, round, phase) cell of a run."""
    return np.random.Generator(
        np.random.PCG64(derive_seed(master_seed, node, round_index, phase))
    )
