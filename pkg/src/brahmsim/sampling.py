"""Min-wise sampling of a node identifier stream.

A sampler remembers the identifier with the smallest keyed hash seen so far.
Because each sampler keys its hash with an independent random seed, feeding
the same stream to many samplers yields a near-uniform sample of the distinct
identifiers observed, no matter how biased the stream's multiplicities are.
An array of such samplers is the self-healing memory of a gossip node: its
entries eventually lock onto permanent, uniformly chosen identifiers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hashing import keyed_hash, keyed_hash_matrix

# Sentinels for an empty sampler slot.
EMPTY_ID = -1
EMPTY_HASH = 0xFFFFFFFFFFFFFFFF


@dataclass
class Sampler:
    """A single min-wise sampler: keeps the id minimizing keyed_hash(seed, id)."""

    hash_seed: int
    stored_id: int = EMPTY_ID
    stored_hash: int = EMPTY_HASH

    def offer(self, node_id: int) -> int:
        """Feed one id; store it if its hash is a new minimum. Returns the stored id.

        Ties keep the currently stored id, so the first-fed of two equal-hash
        ids wins (negligible at 64 bits, but deterministic).
        """
        h = keyed_hash(self.hash_seed, node_id)
        if h < self.stored_hash:
            self.stored_hash = h
            self.stored_id = node_id
        return self.stored_id

    @property
    def empty(self) -> bool:
        return self.stored_id == EMPTY_ID


def sampler_next(sampler: Sampler, node_id: int) -> int:
    """Functional alias for Sampler.offer."""
    return sampler.offer(node_id)


class SampleList:
    """An ordered array of independently seeded min-wise samplers.

    State is kept in parallel numpy arrays so that feeding a batch of ids
    costs one vectorized hash evaluation instead of a Python loop. Feeding is
    idempotent per distinct id: offering an id a second time can never change
    any sampler, so callers may pre-filter repeats for speed.
    """

    def __init__(self, seeds: np.ndarray):
        self.seeds = seeds.astype(np.uint64)
        n = len(seeds)
        self.stored_ids = np.full(n, EMPTY_ID, dtype=np.int64)
        self.stored_hashes = np.full(n, EMPTY_HASH, dtype=np.uint64)

    @classmethod
    def create(cls, count: int, rng: np.random.Generator) -> "SampleList":
        seeds = rng.integers(0, 2**64, size=count, dtype=np.uint64)
        return cls(seeds)

    def __len__(self) -> int:
        return len(self.seeds)

    @property
    def samplers(self) -> list[Sampler]:
        """Scalar snapshot of each sampler (for inspection and tests)."""
        return [
            Sampler(int(s), int(i), int(h))
            for s, i, h in zip(self.seeds, self.stored_ids, self.stored_hashes)
        ]

    def feed(self, stream) -> None:
        """Offer every id in `stream` to every sampler.

        Equivalent to folding Sampler.offer over the stream for each sampler
        (up to 64-bit hash ties). Duplicates are collapsed before hashing.
        """
        ids = np.unique(np.asarray(stream, dtype=np.int64))
        if ids.size == 0:
            return
        hashes = keyed_hash_matrix(self.seeds, ids)
        cols = hashes.argmin(axis=1)
        mins = hashes[np.arange(len(self.seeds)), cols]
        better = mins < self.stored_hashes
        self.stored_hashes[better] = mins[better]
        self.stored_ids[better] = ids[cols[better]]

    def stored(self) -> np.ndarray:
        """Stored ids of the non-empty samplers (one entry persampler, multiset)."""
        return self.stored_ids[self.stored_ids != EMPTY_ID]

    def random_sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        """k ids drawn uniformly with replacement from the non-empty samplers.

        All samplers empty yields an empty array; the caller fills its view
        from the other streams.
        """
        pool = self.stored()
        if pool.size == 0 or k <= 0:
            return np.empty(0, dtype=np.int64)
        return rng.choice(pool, size=k, replace=True)


def sample_list_feed(sample_list: SampleList, stream) -> SampleList:
    """Feed a stream through the sample list and return it (mutated in place)."""
    sample_list.feed(stream)
    return sample_list


def sample_list_random(sample_list: SampleList, k: int, rng: np.random.Generator) -> np.ndarray:
    """Functional alias for SampleList.random_sample."""
    return sample_list.random_sample(k, rng)
