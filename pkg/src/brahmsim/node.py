"""Per-node simulation state."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .brahms import RoundInbox, View
from .sampling import SampleList


class NodeClass(Enum):
    HONEST = "honest"
    TRUSTED = "trusted"
    BYZANTINE = "byzantine"
    POISONED_TRUSTED = "poisoned_trusted"

    @property
    def is_trusted(self) -> bool:
        """Holds the shared key and runs the trusted-node code paths.

        Poisoned trusted nodes are genuine trusted nodes whose initial state
        was filled by the adversary; after construction the protocol treats
        the two classes identically.
        """
        return self in (NodeClass.TRUSTED, NodeClass.POISONED_TRUSTED)

    @property
    def is_byzantine(self) -> bool:
        return self is NodeClass.BYZANTINE


@dataclass
class NodeState:
    """Everything one node owns: identity, role, key, view, samplers, inbox.

    Byzantine nodes keep no view or samplers (their replies come from the
    adversary), so those fields are None for them. `seen` is a boolean mask
    over the dense id universe recording every id that ever entered this
    node's view or sampler stream; `seen_nonbyz` caches how many of those are
    non-Byzantine, which drives the discovery metric.
    """

    node_id: int
    node_class: NodeClass
    key: bytes
    view: View | None = None
    samples: SampleList | None = None
    inbox: RoundInbox = field(default_factory=RoundInbox)
    seen: np.ndarray | None = None
    seen_nonbyz: int = 0
