"""Byzantine-resilient peer sampling simulator.

A protocol library and round-based simulator for gossip peer sampling with
min-wise sampler self-healing, an adversary model (push flooding, poisoned
pulls, trusted-node identification, poisoned-node injection), TEE-backed
trusted-node extensions, and an experiment harness with CSV output.
"""

from .adversary import (
    AdversaryConfig,
    IdentObservation,
    balanced_pushes,
    bootstrap_poisoned_trusted,
    byzantine_pull_reply,
    identify_trusted,
)
from .brahms import (
    BrahmsParams,
    RoundInbox,
    View,
    ViewEntry,
    detect_push_flood,
    make_pull_reply,
    renew_view,
    select_pull_targets,
    select_push_targets,
)
from .config import ConfigError, ExperimentConfig, parse_config, preset
from .engine import (
    ConfigurationError,
    RunConfig,
    RunTrace,
    SimulationState,
    build_population,
    run_experiment,
    run_round,
    run_single,
)
from .metrics import (
    IdentReport,
    RoundMetrics,
    discovery_time,
    ident_report,
    resilience_improvement,
    stability_time,
)
from .node import NodeClass, NodeState
from .sampling import SampleList, Sampler, sample_list_feed, sample_list_random, sampler_next
from .trusted import (
    EvictionPolicy,
    HandshakeTranscript,
    adaptive_eviction_rate,
    evict,
    handshake,
    mutual_trust,
    trusted_exchange,
)

__version__ = "0.1.0"
