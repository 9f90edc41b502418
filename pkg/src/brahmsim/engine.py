"""Synchronous round-based simulation of the peer sampling service.

Each round runs four phases over the whole population: (1) push emission,
including the adversary's balanced flood; (2) handshakes and pulls, where a
mutually authenticated pair of trusted nodes swaps view halves instead of
doing a plain pull, and every pull aimed at a Byzantine node draws a poisoned
reply; (3) per-node eviction, sampler feeding, flood detection and view
renewal; (4) inbox reset. Plain pull replies are snapshots of the views as
they stood at round start, so delivery order never matters; trusted swaps
apply to live views in ascending initiator order, which keeps multi-swap
rounds deterministic.

Every random draw comes from a generator derived from (master seed, node id,
round, phase), making a whole run a pure function of its configuration and
seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics as metrics_mod
from .adversary import (
    AdversaryConfig,
    balanced_pushes,
    bootstrap_poisoned_trusted,
    byzantine_pull_reply,
    probe_targets,
)
from .brahms import (
    BrahmsParams,
    View,
    detect_push_flood,
    make_pull_reply,
    renew_view,
    round_half_up,
    select_pull_targets,
    select_push_targets,
)
from .hashing import (
    PHASE_ADVERSARY,
    PHASE_BOOT,
    PHASE_IDENT,
    PHASE_PULL,
    PHASE_PUSH,
    PHASE_RENEW,
    SYSTEM_NODE,
    derive_rng,
)
from .node import NodeClass, NodeState
from .sampling import SampleList
from .trusted import (
    EvictionPolicy,
    evict,
    mutual_trust,
    random_key,
    trusted_exchange,
    trusted_key_from_seed,
)


class ConfigurationError(ValueError):
    """Invalid population or experiment parameters."""


@dataclass(frozen=True)
class RunConfig:
    """One experiment point: a single population and parameter set."""

    n: int
    byzantine_fraction: float
    trusted_fraction: float
    params: BrahmsParams
    policy: EvictionPolicy
    rounds: int
    seed: int
    push_budget_factor: float = 1.0
    ident_attack: bool = False
    ident_threshold: float = 0.10
    injection_fraction: float = 0.0

    def adversary_config(self) -> AdversaryConfig:
        budget = round_half_up(self.push_budget_factor * self.params.push_quota)
        return AdversaryConfig(
            push_budget_per_node=budget,
            ident_threshold=self.ident_threshold,
            ident_attack=self.ident_attack,
            poisoned_injection_fraction=self.injection_fraction,
        )


@dataclass
class SimulationState:
    round: int
    nodes: list[NodeState]
    params: BrahmsParams
    master_seed: int
    trusted_key: bytes
    adversary: AdversaryConfig
    byz_mask: np.ndarray
    trusted_mask: np.ndarray  # includes poisoned trusted
    poisoned_mask: np.ndarray
    nonbyz_ids: np.ndarray
    total_nonbyz: int
    # Filled by run_round for the metrics collector.
    last_rates: dict[int, float] = field(default_factory=dict)
    last_blocked: int = 0
    last_pull_replies: dict[int, int] = field(default_factory=dict)
    # Identification-attack accumulators (dense over the id universe).
    obs_sum: np.ndarray | None = None
    obs_cnt: np.ndarray | None = None
    ident_history: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    keep_inboxes: bool = False
    last_inboxes: dict[int, object] = field(default_factory=dict)

    @property
    def universe(self) -> int:
        return len(self.nodes)


def build_population(
    n: int,
    byzantine_fraction: float,
    trusted_fraction: float,
    params: BrahmsParams,
    adversary: AdversaryConfig,
    seed: int,
) -> SimulationState:
    """Create the node population with bootstrap views and samplers.

    Class counts use round-half-up of the requested fractions. Every
    non-Byzantine node starts with a uniform random sample of the real
    network (excluding itself) as its view and empty samplers; trusted nodes
    share one secret key, everyone else gets an independent random one.
    Injected poisoned trusted nodes take ids n..n+k-1 and are advertised by
    the adversary instead of appearing in bootstrap views.
    """
    if not 0 <= byzantine_fraction <= 1 or not 0 <= trusted_fraction <= 1:
        raise ConfigurationError("fractions must lie in [0, 1]")
    if byzantine_fraction + trusted_fraction > 1:
        raise ConfigurationError("byzantine_fraction + trusted_fraction must not exceed 1")
    n_byz = round_half_up(byzantine_fraction * n)
    n_trusted = round_half_up(trusted_fraction * n)
    if n_byz + n_trusted > n:
        raise ConfigurationError("rounded class counts exceed the population")
    n_poison = round_half_up(adversary.poisoned_injection_fraction * n)
    if n_poison > 0 and n_byz == 0:
        raise ConfigurationError("poisoned injection requires Byzantine nodes")
    universe = n + n_poison

    assign_rng = derive_rng(seed, SYSTEM_NODE, 0, PHASE_BOOT)
    perm = assign_rng.permutation(n)
    byz_ids = np.sort(perm[:n_byz]).astype(np.int64)
    trusted_ids = np.sort(perm[n_byz : n_byz + n_trusted]).astype(np.int64)

    byz_mask = np.zeros(universe, dtype=bool)
    byz_mask[byz_ids] = True
    trusted_mask = np.zeros(universe, dtype=bool)
    trusted_mask[trusted_ids] = True
    trusted_mask[n:] = True
    poisoned_mask = np.zeros(universe, dtype=bool)
    poisoned_mask[n:] = True

    trusted_key = trusted_key_from_seed(seed)
    view_len = min(params.view_size, n - 1)

    nodes: list[NodeState] = []
    for i in range(n):
        rng = derive_rng(seed, i, 0, PHASE_BOOT)
        if byz_mask[i]:
            nodes.append(NodeState(i, NodeClass.BYZANTINE, key=random_key(rng)))
            continue
        cls = NodeClass.TRUSTED if trusted_mask[i] else NodeClass.HONEST
        key = trusted_key if trusted_mask[i] else random_key(rng)
        # Uniform sample of the real network without self: draw from n-1
        # slots and shift past the own index.
        ids = rng.choice(n - 1, size=view_len, replace=False).astype(np.int64)
        ids[ids >= i] += 1
        nodes.append(
            NodeState(
                i,
                cls,
                key=key,
                view=View(ids),
                samples=SampleList.create(params.sampler_count, rng),
            )
        )

    adversary = replace(
        adversary,
        byz_ids=byz_ids,
        advertised_ids=np.concatenate([byz_ids, np.arange(n, universe, dtype=np.int64)]),
    )
    nodes.extend(
        bootstrap_poisoned_trusted(adversary, n_poison, params, trusted_key, n, seed)
    )

    for node in nodes:
        if node.node_class.is_byzantine:
            continue
        seen = np.zeros(universe, dtype=bool)
        seen[node.view.ids] = True
        seen[node.node_id] = True
        if node.node_class is NodeClass.POISONED_TRUSTED:
            seen[byz_ids] = True
        node.seen = seen
        node.seen_nonbyz = int((seen & ~byz_mask).sum())

    nonbyz_ids = np.flatnonzero(~byz_mask).astype(np.int64)
    return SimulationState(
        round=0,
        nodes=nodes,
        params=params,
        master_seed=seed,
        trusted_key=trusted_key,
        adversary=adversary,
        byz_mask=byz_mask,
        trusted_mask=trusted_mask,
        poisoned_mask=poisoned_mask,
        nonbyz_ids=nonbyz_ids,
        total_nonbyz=len(nonbyz_ids),
    )


def run_round(
    state: SimulationState,
    adversary: AdversaryConfig,
    policy: EvictionPolicy,
) -> SimulationState:
    """Advance the simulation by one synchronous round (mutates `state`)."""
    rnd = state.round
    seed = state.master_seed
    params = state.params
    nodes = state.nodes
    byz_mask = state.byz_mask
    nonbyz = state.nonbyz_ids

    for i in nonbyz:
        nodes[i].view.age_all()

    # Pre-round snapshots answer every plain pull this round.
    snapshots: dict[int, np.ndarray] = {int(i): make_pull_reply(nodes[i].view) for i in nonbyz}
    byz_replies: dict[int, np.ndarray] = {}

    def byz_reply(target: int) -> np.ndarray:
        # A Byzantine node fixes one poisoned reply per round, mirroring the
        # snapshot semantics of honest replies.
        reply = byz_replies.get(target)
        if reply is None:
            reply = byzantine_pull_reply(
                adversary, params.view_size, derive_rng(seed, target, rnd, PHASE_ADVERSARY)
            )
            byz_replies[target] = reply
        return reply

    # Phase 1: push emission.
    target_chunks: list[np.ndarray] = []
    id_chunks: list[np.ndarray] = []
    for i in nonbyz:
        rng = derive_rng(seed, i, rnd, PHASE_PUSH)
        targets = select_push_targets(nodes[i].view, params, rng)
        target_chunks.append(targets)
        id_chunks.append(np.full(len(targets), i, dtype=np.int64))
    if adversary.byz_ids.size and adversary.push_budget_per_node > 0:
        adv_rng = derive_rng(seed, SYSTEM_NODE, rnd, PHASE_ADVERSARY)
        adv_targets, adv_ids = balanced_pushes(adversary, nonbyz, adv_rng)
        target_chunks.append(adv_targets)
        id_chunks.append(adv_ids)

    all_targets = np.concatenate(target_chunks)
    all_ids = np.concatenate(id_chunks)
    deliverable = ~byz_mask[all_targets]
    all_targets = all_targets[deliverable]
    all_ids = all_ids[deliverable]
    order = np.argsort(all_targets, kind="stable")
    sorted_targets = all_targets[order]
    sorted_ids = all_ids[order]
    receivers, starts = np.unique(sorted_targets, return_index=True)
    bounds = np.append(starts, len(sorted_targets))
    for k, receiver in enumerate(receivers):
        nodes[receiver].inbox.pushes = sorted_ids[bounds[k] : bounds[k + 1]]

    # Phase 2: handshakes, pulls, trusted swaps.
    rates: dict[int, float] = {}
    reply_counts: dict[int, int] = {}
    for i in nonbyz:
        i = int(i)
        node = nodes[i]
        rng = derive_rng(seed, i, rnd, PHASE_PULL)
        targets = select_pull_targets(node.view, params, rng)
        trusted_partners = 0
        for t in targets.tolist():
            # Every pull is preceded by the mutual-authentication handshake;
            # mutual_trust is its outcome (identical message pattern either
            # way, so nothing else observable happens on failure).
            if byz_mask[t]:
                node.inbox.pulled_untrusted.append(byz_reply(t))
            elif mutual_trust(node.key, nodes[t].key):
                trusted_partners += 1
                new_i, new_t, recv_i, recv_t = trusted_exchange(
                    node.view, nodes[t].view, i, rng, responder_id=t
                )
                node.view = new_i
                nodes[t].view = new_t
                node.inbox.pulled_trusted.append(recv_i)
                nodes[t].inbox.pulled_trusted.append(recv_t)
            else:
                node.inbox.pulled_untrusted.append(snapshots[t])
        reply_counts[i] = len(targets)
        if node.node_class.is_trusted:
            rates[i] = policy.rate_for(trusted_partners, len(targets))

    # Identification probes read the same snapshots and leave no trace in
    # honest state.
    if adversary.ident_attack and adversary.byz_ids.size:
        if state.obs_sum is None:
            state.obs_sum = np.zeros(state.universe)
            state.obs_cnt = np.zeros(state.universe, dtype=np.int64)
        ident_rng = derive_rng(seed, SYSTEM_NODE, rnd, PHASE_IDENT)
        probes = probe_targets(adversary, nonbyz, params.pull_quota, ident_rng)
        counts = np.bincount(probes, minlength=state.universe)
        fracs = np.zeros(state.universe)
        for i in nonbyz:
            snap = snapshots[int(i)]
            fracs[i] = byz_mask[snap].mean() if snap.size else 0.0
        state.obs_sum += counts * fracs
        state.obs_cnt += counts
        state.ident_history.append((state.obs_sum.copy(), state.obs_cnt.copy()))

    # Phase 3: eviction, sampler feed, flood detection, view renewal.
    blocked = 0
    state.last_inboxes = {}
    for i in nonbyz:
        i = int(i)
        node = nodes[i]
        rng = derive_rng(seed, i, rnd, PHASE_RENEW)
        pulled_untrusted = node.inbox.pulled_untrusted_array()
        rate = rates.get(i, 0.0)
        survivors = evict(pulled_untrusted, rate, rng) if rate > 0.0 else pulled_untrusted
        node.inbox.pulled_untrusted = [survivors]

        stream = np.concatenate([survivors, node.inbox.pulled_trusted_array(), node.inbox.pushes])
        if stream.size:
            fresh = stream[~node.seen[stream]]
            if fresh.size:
                fresh = np.unique(fresh)
                node.samples.feed(fresh)
                node.seen[fresh] = True
                node.seen_nonbyz += int((~byz_mask[fresh]).sum())

        if detect_push_flood(node.inbox, params):
            blocked += 1
        else:
            new_view, changed = renew_view(node.view, node.inbox, node.samples, params, rng, i)
            if changed:
                node.view = new_view
        if state.keep_inboxes:
            state.last_inboxes[i] = node.inbox
            node.inbox = type(node.inbox)()
        else:
            node.inbox.clear()

    state.last_rates = rates
    state.last_blocked = blocked
    state.last_pull_replies = reply_counts
    state.round += 1
    return state


@dataclass
class RunTrace:
    """Everything recorded about one seeded run."""

    config: RunConfig
    seed: int
    rows: list["metrics_mod.RoundMetrics"]
    trusted_ids: np.ndarray
    poisoned_ids: np.ndarray
    byz_ids: np.ndarray
    ident_history: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    ident_threshold: float = 0.10


def run_single(config: RunConfig) -> RunTrace:
    """Run one seeded simulation and collect per-round metrics.

    The trace starts with a round-0 row describing the bootstrap state, so a
    run of R rounds yields R+1 rows.
    """
    adversary = config.adversary_config()
    state = build_population(
        config.n,
        config.byzantine_fraction,
        config.trusted_fraction,
        config.params,
        adversary,
        config.seed,
    )
    collector = metrics_mod.MetricsCollector()
    rows = [collector.collect(state)]
    for _ in range(config.rounds):
        run_round(state, state.adversary, config.policy)
        rows.append(collector.collect(state))
    trusted_only = state.trusted_mask & ~state.poisoned_mask
    return RunTrace(
        config=config,
        seed=config.seed,
        rows=rows,
        trusted_ids=np.flatnonzero(trusted_only),
        poisoned_ids=np.flatnonzero(state.poisoned_mask),
        byz_ids=state.adversary.byz_ids,
        ident_history=state.ident_history,
        ident_threshold=config.ident_threshold,
    )


def run_experiment(config: RunConfig, repetitions: int) -> list[RunTrace]:
    """Repeat one experiment point with seeds seed+0 .. seed+(reps-1)."""
    if repetitions < 1:
        raise ConfigurationError("repetitions must be >= 1")
    traces = []
    for rep in range(repetitions):
        traces.append(run_single(replace(config, seed=config.seed + rep)))
    return traces
