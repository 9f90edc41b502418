"""Per-node Brahms round logic.

Each node keeps a dynamic view of peer ids. Every round it pushes its own id
to a few view members, pulls the full views of a few others, and then renews
its view by mixing three streams: ids received via push, ids received via
pull, and a history sample from its min-wise sampler array. Two defenses are
implemented here: flood blocking (skip renewal when more pushes arrive than
the expected quota) and the fixed push/pull/history mixing quotas themselves,
which bound how far any single channel can bias the view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import SampleList


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class BrahmsParams:
    """View size, sampler count and the push/pull/history mixing shares."""

    view_size: int = 200
    sampler_count: int = 200
    push_share: float = 0.4
    pull_share: float = 0.4
    history_share: float = 0.2

    def __post_init__(self):
        if self.view_size < 1:
            raise ValueError("view_size must be >= 1")
        if self.sampler_count < 1:
            raise ValueError("sampler_count must be >= 1")
        for name in ("push_share", "pull_share", "history_share"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        total = self.push_share + self.pull_share + self.history_share
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"shares must sum to 1, got {total}")

    @property
    def push_quota(self) -> int:
        return round_half_up(self.push_share * self.view_size)

    @property
    def pull_quota(self) -> int:
        return round_half_up(self.pull_share * self.view_size)

    @property
    def history_quota(self) -> int:
        # Remainder rather than rounding, so the three quotas always sum to
        # the view size.
        return self.view_size - self.push_quota - self.pull_quota


@dataclass(frozen=True)
class ViewEntry:
    node_id: int
    age: int


class View:
    """A node's dynamic view: peer ids with per-entry ages.

    Ages count completed rounds survived since insertion; freshly inserted
    entries carry age 0. A node's own id never appears in its own view.
    """

    __slots__ = ("ids", "ages")

    def __init__(self, ids: np.ndarray, ages: np.ndarray | None = None):
        self.ids = np.asarray(ids, dtype=np.int64)
        if ages is None:
            ages = np.zeros(len(self.ids), dtype=np.int64)
        self.ages = np.asarray(ages, dtype=np.int64)
        if len(self.ids) != len(self.ages):
            raise ValueError("ids and ages must have equal length")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def entries(self) -> list[ViewEntry]:
        return [ViewEntry(int(i), int(a)) for i, a in zip(self.ids, self.ages)]

    def copy(self) -> "View":
        return View(self.ids.copy(), self.ages.copy())

    def age_all(self) -> None:
        """One round survived: every current entry grows one round older."""
        self.ages += 1


@dataclass
class RoundInbox:
    """Ids collected by one node during one round, by channel.

    pulled_untrusted / pulled_trusted hold one array per reply so that reply
    snapshots can be shared without copying; callers concatenate on demand.
    pulled_trusted stays empty for nodes without trusted exchanges.
    """

    pushes: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    pulled_untrusted: list[np.ndarray] = field(default_factory=list)
    pulled_trusted: list[np.ndarray] = field(default_factory=list)

    def clear(self) -> None:
        self.pushes = np.empty(0, dtype=np.int64)
        self.pulled_untrusted = []
        self.pulled_trusted = []

    def pulled_untrusted_array(self) -> np.ndarray:
        if not self.pulled_untrusted:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self.pulled_untrusted)

    def pulled_trusted_array(self) -> np.ndarray:
        if not self.pulled_trusted:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self.pulled_trusted)


def _select_targets(view: View, count: int, rng: np.random.Generator) -> np.ndarray:
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    if len(view) <= count:
        # Bootstrap rounds only: short view, take everything.
        return view.ids.copy()
    return rng.choice(view.ids, size=count, replace=False)


def select_push_targets(view: View, params: BrahmsParams, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw without replacement of the push quota from the view."""
    return _select_targets(view, params.push_quota, rng)


def select_pull_targets(view: View, params: BrahmsParams, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw without replacement of the pull quota; independent of pushes."""
    return _select_targets(view, params.pull_quota, rng)


def detect_push_flood(inbox: RoundInbox, params: BrahmsParams) -> bool:
    """True iff more pushes arrived than the expected per-round quota."""
    return len(inbox.pushes) > params.push_quota


def make_pull_reply(view: View) -> np.ndarray:
    """Full-view reply to a pull request (snapshot taken before renewal)."""
    return view.ids.copy()


def _take_distinct(
    source: np.ndarray,
    need: int,
    chosen: set[int],
    out: list[int],
    rng: np.random.Generator,
) -> int:
    """Pick up to `need` ids from `source` without replacement at the entry
    level, skipping ids already chosen, and append them to `out`.

    Entry-level sampling means an id occupying k entries is k times as likely
    to be picked, but each id enters the new view at most once. Returns how
    many ids were actually taken.
    """
    if need <= 0 or source.size == 0:
        return 0
    taken = 0
    if source.size <= need:
        # Sampling without replacement would touch every entry anyway.
        for v in source.tolist():
            if v not in chosen:
                chosen.add(v)
                out.append(v)
                taken += 1
        return taken
    # A small without-replacement sample usually yields enough distinct fresh
    # ids without permuting the whole stream; fall back to a full permutation
    # when the source is dominated by repeats.
    probe = min(source.size, max(3 * need, 16))
    for attempt in range(2):
        cand = (
            rng.choice(source, size=probe, replace=False)
            if attempt == 0 and probe < source.size
            else rng.permutation(source)
        )
        for v in cand.tolist():
            if v in chosen:
                continue
            chosen.add(v)
            out.append(v)
            taken += 1
            if taken == need:
                return taken
        if probe >= source.size:
            break
    return taken


def renew_view(
    view: View,
    inbox: RoundInbox,
    samples: SampleList,
    params: BrahmsParams,
    rng: np.random.Generator,
    own_id: int,
) -> tuple[View, bool]:
    """End-of-round view renewal mixing pushed, pulled and history ids.

    inbox.pulled_untrusted must already be the post-eviction survivors. The
    renewed view holds exactly view_size entries at age 0: the push quota
    drawn from the received push multiset, the pull quota from the pulled
    stream (survivors plus trusted-exchange ids), and the history quota from
    the sampler array. An empty stream's quota is split evenly across the
    remaining ones; if everything is empty the old view is kept unchanged.
    Draws are without replacement per entry and deduplicated across the whole
    new view, so duplicates appear only when the streams cannot supply enough
    distinct ids.

    Returns (new_view, changed).
    """
    pushes = inbox.pushes
    pulled = np.concatenate([inbox.pulled_untrusted_array(), inbox.pulled_trusted_array()])
    history = samples.stored()

    streams = []
    for arr, quota in (
        (pushes, params.push_quota),
        (pulled, params.pull_quota),
        (history, params.history_quota),
    ):
        arr = arr[arr != own_id]
        streams.append([arr, quota])

    active = [s for s in streams if s[0].size > 0]
    if not active:
        return view, False

    # Reassign quotas of empty streams evenly over the active ones, leftover
    # units going to the earliest streams in push/pull/history order.
    idle_quota = sum(q for arr, q in streams if arr.size == 0)
    share, leftover = divmod(idle_quota, len(active))
    for i, s in enumerate(active):
        s[1] += share + (1 if i < leftover else 0)

    out: list[int] = []
    chosen: set[int] = set()
    shortfall = 0
    for arr, quota in active:
        shortfall += quota - _take_distinct(arr, quota, chosen, out, rng)

    if shortfall > 0:
        # Second pass: fill leftover quota from any stream that still has
        # unchosen ids, in stream order.
        for arr, _ in active:
            if shortfall == 0:
                break
            shortfall -= _take_distinct(arr, shortfall, chosen, out, rng)

    if shortfall > 0:
        # Streams cannot supply enough distinct ids: pad with duplicates to
        # preserve the view size.
        pool = np.concatenate([arr for arr, _ in active])
        out.extend(int(v) for v in rng.choice(pool, size=shortfall, replace=True))

    new_ids = np.array(out, dtype=np.int64)
    return View(new_ids), True
