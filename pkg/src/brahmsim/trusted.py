"""Trusted-node extensions to the gossip round.

TEE-backed nodes share one symmetric secret key (provisioned out of band;
modeled here as key injection at population build time). Three mechanisms let
them cooperate without revealing themselves:

* a three-message challenge/response handshake run before every pull, which
  lets two key-holders recognize each other while looking identical on the
  wire to everyone else;
* a half-view exchange replacing the plain pull between two mutually
  authenticated nodes, with the initiator inserting a link to itself into the
  half it sends;
* probabilistic eviction of ids pulled from untrusted peers, either at a
  fixed rate or adapted per round to the share of trusted pull partners.

Cipher choice: tags are the SHA-256 of the concatenated nonces, encrypted
with AES-128-CTR keyed by the party's secret key (the CTR nonce is derived
from both handshake nonces). Decrypting with a different key yields a value
that matches the expected hash only with negligible probability.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .brahms import View

KEY_BYTES = 16
NONCE_BYTES = 16
TAG_BYTES = 32  # SHA-256 digest size

RATE_FLOOR = 0.20
RATE_CEIL = 0.80


def random_key(rng: np.random.Generator) -> bytes:
    """Fresh 128-bit symmetric key (one per untrusted node)."""
    return rng.bytes(KEY_BYTES)


def trusted_key_from_seed(seed: int) -> bytes:
    """The shared trusted-node key, derived deterministically from a run seed."""
    return hashlib.blake2b(seed.to_bytes(8, "little"), key=b"trusted-key", digest_size=KEY_BYTES).digest()


@dataclass(frozen=True)
class HandshakeTranscript:
    """The three messages of one handshake, as seen on the wire."""

    r_a: bytes
    r_b: bytes
    tag_b: bytes  # message 2 payload: encryption of H(r_a || r_b)
    tag_a: bytes  # message 3 payload: encryption of H(r_b || r_a), or filler


def _encrypt(key: bytes, r_first: bytes, r_second: bytes, digest: bytes) -> bytes:
    nonce = hashlib.sha256(b"ctr" + r_first + r_second).digest()[:16]
    enc = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return enc.update(digest) + enc.finalize()


def _tag_matches(key: bytes, r_first: bytes, r_second: bytes, tag: bytes) -> bool:
    expected = hashlib.sha256(r_first + r_second).digest()
    nonce = hashlib.sha256(b"ctr" + r_first + r_second).digest()[:16]
    dec = Cipher(algorithms.AES(key), modes.CTR(nonce)).decryptor()
    return dec.update(tag) + dec.finalize() == expected


def handshake(
    initiator_key: bytes,
    responder_key: bytes,
    rng: np.random.Generator,
) -> tuple[bool, bool, HandshakeTranscript]:
    """Run the full three-message mutual authentication exchange.

    A sends nonce r_a; B answers with nonce r_b plus the hash of both nonces
    encrypted under its own key; A validates, then answers with the mirrored
    tag under its own key. A genuine third tag is only sent after A's check
    succeeded; on failure A sends random filler of identical size, so the
    message count and sizes never depend on the outcome and responder trust
    implies initiator trust.
    """
    r_a = rng.bytes(NONCE_BYTES)
    r_b = rng.bytes(NONCE_BYTES)
    digest_ab = hashlib.sha256(r_a + r_b).digest()
    tag_b = _encrypt(responder_key, r_a, r_b, digest_ab)

    initiator_trusts = _tag_matches(initiator_key, r_a, r_b, tag_b)
    if initiator_trusts:
        digest_ba = hashlib.sha256(r_b + r_a).digest()
        tag_a = _encrypt(initiator_key, r_b, r_a, digest_ba)
    else:
        tag_a = rng.bytes(TAG_BYTES)
    responder_trusts = _tag_matches(responder_key, r_b, r_a, tag_a)

    return initiator_trusts, responder_trusts, HandshakeTranscript(r_a, r_b, tag_b, tag_a)


def mutual_trust(initiator_key: bytes, responder_key: bytes) -> bool:
    """Outcome-equivalent shortcut for `handshake`: both parties trust iff the
    keys are equal.

    The full exchange succeeds exactly when both sides hold the same key
    (up to the negligible chance of a wrong-key decryption reproducing a
    SHA-256 digest), so the simulation engine uses this comparison on its
    hot path. Equivalence is asserted by tests.
    """
    return initiator_key == responder_key


@dataclass(frozen=True)
class EvictionPolicy:
    """Eviction behavior of trusted nodes: a fixed rate or the adaptive rule."""

    mode: str  # "fixed" | "adaptive" | "none"
    rate: float | None = None

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive", "none"):
            raise ValueError(f"unknown eviction mode {self.mode!r}")
        if self.mode == "fixed":
            if self.rate is None or not 0.0 <= self.rate <= 1.0:
                raise ValueError("fixed eviction needs a rate in [0, 1]")

    @classmethod
    def fixed(cls, rate: float) -> "EvictionPolicy":
        return cls("fixed", rate)

    @classmethod
    def adaptive(cls) -> "EvictionPolicy":
        return cls("adaptive")

    @classmethod
    def none(cls) -> "EvictionPolicy":
        """Baseline populations without trusted nodes."""
        return cls("none")

    def rate_for(self, trusted_partners: int, total_pull_partners: int) -> float:
        if self.mode == "fixed":
            return self.rate
        if self.mode == "adaptive":
            return adaptive_eviction_rate(trusted_partners, total_pull_partners)
        return 0.0

    def label(self) -> str:
        if self.mode == "fixed":
            return f"{self.rate:.6f}"
        return self.mode


def adaptive_eviction_rate(trusted_partners: int, total_pull_partners: int) -> float:
    """Per-round adaptive eviction rate.

    With p the share of this round's pull partners that authenticated as
    trusted, the rate is the line 1 - p clamped to [0.20, 0.80]: few trusted
    contacts means aggressive eviction, many means little is discarded. No
    pull partners at all yields the maximum-caution 0.80.
    """
    if total_pull_partners <= 0:
        return RATE_CEIL
    if not 0 <= trusted_partners <= total_pull_partners:
        raise ValueError("trusted_partners must lie in [0, total_pull_partners]")
    p = trusted_partners / total_pull_partners
    return min(RATE_CEIL, max(RATE_FLOOR, 1.0 - p))


def evict(pulled_untrusted: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random subsequence keeping floor((1 - rate) * len) entries.

    Only the survivors reach the sampler array and the pull quota of the view
    renewal. Exact-count subset sampling keeps the survivor count (and thus
    the renewal arithmetic) reproducible.
    """
    pulled_untrusted = np.asarray(pulled_untrusted, dtype=np.int64)
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"eviction rate must lie in [0, 1], got {rate}")
    k = len(pulled_untrusted)
    keep = int((1.0 - rate) * k)
    if keep >= k:
        return pulled_untrusted
    if keep == 0:
        return np.empty(0, dtype=np.int64)
    idx = rng.choice(k, size=keep, replace=False)
    idx.sort()
    return pulled_untrusted[idx]


def trusted_exchange(
    initiator_view: View,
    responder_view: View,
    initiator_id: int,
    rng: np.random.Generator,
    responder_id: int | None = None,
) -> tuple[View, View, np.ndarray, np.ndarray]:
    """Half-view swap between two mutually authenticated trusted nodes.

    Each party selects a uniform random half (floor(len/2) entries) of its
    view and sends those ids; the initiator additionally overwrites one
    uniformly chosen slot of its outgoing copy with its own id, advertising a
    link to itself. Each party then replaces its sent-out slots with the ids
    it received (shuffle semantics: a sent link survives only at the
    partner), inserted at age 0. A received id equal to the receiver's own id
    is skipped when applied, keeping the original entry in that slot, so a
    view never gains its owner's id.

    Returns (new_initiator_view, new_responder_view, ids_received_by_initiator,
    ids_received_by_responder); the received arrays are unfiltered and feed
    the trusted side of the round inbox. Views shorter than 2 entries skip
    the exchange and are returned unchanged.
    """
    vi, vr = initiator_view, responder_view
    if len(vi) < 2 or len(vr) < 2:
        empty = np.empty(0, dtype=np.int64)
        return vi, vr, empty, empty

    half_i = len(vi) // 2
    half_r = len(vr) // 2
    slots_i = rng.choice(len(vi), size=half_i, replace=False)
    slots_r = rng.choice(len(vr), size=half_r, replace=False)

    sent_i = vi.ids[slots_i].copy()
    sent_i[rng.integers(0, half_i)] = initiator_id
    sent_r = vr.ids[slots_r].copy()

    new_i = _swap_in(vi, slots_i, sent_r, own_id=initiator_id)
    new_r = _swap_in(vr, slots_r, sent_i, own_id=responder_id)
    return new_i, new_r, sent_r, sent_i


def _swap_in(view: View, slots: np.ndarray, received: np.ndarray, own_id: int | None) -> View:
    new = view.copy()
    if own_id is not None:
        received = received[received != own_id]
    count = min(len(slots), len(received))
    new.ids[slots[:count]] = received[:count]
    new.ages[slots[:count]] = 0
    return new
