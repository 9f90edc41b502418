"""Adversary strategies against the peer sampling service.

A single adversary controls every Byzantine node with full knowledge of the
membership (but not of which nodes are trusted). Its levers:

* balanced push flooding: each Byzantine node spends a per-round push budget,
  spread as evenly as possible over the correct nodes, always advertising
  Byzantine ids;
* poisoned pull replies: every pull aimed at a Byzantine node is answered
  with a view-sized batch of Byzantine ids;
* trusted-node identification: Byzantine nodes probe correct nodes with pull
  requests (replies are snapshots, so probing is invisible to honest state),
  record how Byzantine each reply is, and label as trusted the nodes whose
  replies are markedly cleaner than average;
* view-poisoned trusted injection: genuine trusted-class nodes bootstrapped
  inside an all-Byzantine network, then dropped into the real one.

Injected poisoned nodes are advertised in pull replies alongside Byzantine
ids: that is the only channel through which the rest of the network can learn
they exist, and spreading their ids is exactly what the injection attack is
for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .brahms import BrahmsParams, View
from .hashing import PHASE_BOOT, derive_rng
from .node import NodeClass, NodeState
from .sampling import SampleList


@dataclass
class AdversaryConfig:
    """Adversary knobs plus (once the population is built) its id sets."""

    push_budget_per_node: int = 0
    ident_threshold: float = 0.10
    ident_attack: bool = False
    poisoned_injection_fraction: float = 0.0
    byz_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    # Ids advertised in pull replies: Byzantine ids plus injected poisoned ids.
    advertised_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        if self.push_budget_per_node < 0:
            raise ValueError("push_budget_per_node must be >= 0")
        if not 0.0 < self.ident_threshold < 1.0:
            raise ValueError("ident_threshold must lie in (0, 1)")
        if self.advertised_ids.size == 0 and self.byz_ids.size > 0:
            self.advertised_ids = self.byz_ids


@dataclass(frozen=True)
class IdentObservation:
    """One Byzantine node's measurement of one pull reply."""

    observer: int
    target: int
    byz_fraction: float
    round_index: int


def balanced_pushes(
    cfg: AdversaryConfig,
    correct_nodes: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """All Byzantine pushes of one round, spread evenly over correct nodes.

    Returns (targets, pushed_ids) arrays of length |byz| * budget. Targets
    are assigned round-robin over a fresh random permutation of the correct
    nodes, so per-target counts differ by at most one; every pushed id is
    drawn uniformly from the Byzantine ids.
    """
    correct_nodes = np.asarray(correct_nodes, dtype=np.int64)
    if correct_nodes.size == 0:
        raise ValueError("no correct nodes to target")
    total = int(cfg.byz_ids.size) * cfg.push_budget_per_node
    if total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    perm = rng.permutation(correct_nodes)
    targets = perm[np.arange(total) % perm.size]
    pushed = rng.choice(cfg.byz_ids, size=total, replace=True)
    return targets, pushed


def byzantine_pull_reply(cfg: AdversaryConfig, view_size: int, rng: np.random.Generator) -> np.ndarray:
    """A poisoned pull reply: view_size adversary-advertised ids.

    Drawn without replacement when enough distinct ids exist, with
    replacement otherwise. Never contains an honest id.
    """
    pool = cfg.advertised_ids
    if pool.size == 0:
        raise ValueError("adversary controls no ids")
    replace = pool.size < view_size
    return rng.choice(pool, size=view_size, replace=replace)


def identify_trusted(
    observations: list[IdentObservation] | tuple[np.ndarray, np.ndarray],
    threshold: float,
) -> set[int]:
    """Label targets whose replies are cleaner than average by more than
    `threshold`.

    Per target, the observed Byzantine fractions are averaged; the global
    reference is the unweighted mean of those per-target averages. A target
    is labeled trusted iff global_avg - target_avg > threshold.

    Accepts either explicit observations or a pre-aggregated
    (per-target sums, per-target counts) pair indexed by node id.
    """
    if isinstance(observations, tuple):
        sums, counts = observations
        observed = np.flatnonzero(counts > 0)
        if observed.size == 0:
            return set()
        avgs = sums[observed] / counts[observed]
    else:
        if not observations:
            return set()
        by_target: dict[int, list[float]] = {}
        for obs in observations:
            by_target.setdefault(obs.target, []).append(obs.byz_fraction)
        observed = np.array(sorted(by_target), dtype=np.int64)
        avgs = np.array([np.mean(by_target[t]) for t in observed])
    global_avg = avgs.mean()
    labeled = observed[(global_avg - avgs) > threshold]
    return set(int(t) for t in labeled)


def bootstrap_poisoned_trusted(
    cfg: AdversaryConfig,
    count: int,
    params: BrahmsParams,
    trusted_key: bytes,
    first_id: int,
    master_seed: int,
) -> list[NodeState]:
    """Build `count` view-poisoned trusted nodes.

    Each is a genuine trusted-class node (it holds the shared key and will
    pass handshakes) whose bootstrap inside an all-Byzantine network is
    collapsed into direct state initialization: a view made entirely of
    Byzantine ids and samplers pre-fed with the Byzantine id stream. From
    then on they run the unmodified trusted protocol.
    """
    if count > 0 and cfg.byz_ids.size == 0:
        raise ValueError("cannot poison views without Byzantine ids")
    nodes = []
    for node_id in range(first_id, first_id + count):
        rng = derive_rng(master_seed, node_id, 0, PHASE_BOOT)
        replace = cfg.byz_ids.size < params.view_size
        view_ids = rng.choice(cfg.byz_ids, size=params.view_size, replace=replace)
        samples = SampleList.create(params.sampler_count, rng)
        samples.feed(cfg.byz_ids)
        nodes.append(
            NodeState(
                node_id=node_id,
                node_class=NodeClass.POISONED_TRUSTED,
                key=trusted_key,
                view=View(view_ids),
                samples=samples,
            )
        )
    return nodes


def probe_targets(
    cfg: AdversaryConfig,
    observable_nodes: np.ndarray,
    pulls_per_observer: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Pull targets probed by the Byzantine observers this round.

    Each Byzantine node issues the same number of pull requests an honest
    node would, aimed uniformly without replacement at non-Byzantine nodes.
    Returns the concatenated targets of all observers (probing only reads
    reply snapshots, so observer identity does not affect state).
    """
    observable_nodes = np.asarray(observable_nodes, dtype=np.int64)
    k = min(pulls_per_observer, observable_nodes.size)
    if k == 0 or cfg.byz_ids.size == 0:
        return np.empty(0, dtype=np.int64)
    out = [rng.choice(observable_nodes, size=k, replace=False) for _ in range(cfg.byz_ids.size)]
    return np.concatenate(out)
