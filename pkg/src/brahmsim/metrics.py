"""Evaluation metrics and CSV output.

Per round we record how Byzantine the non-Byzantine views are (mean, min,
max, and the honest/trusted class breakdown), the cumulative discovery
fraction, and whether the round satisfies the view-stability bound. Over a
whole trace we derive discovery time, stability time, the post-stability
pollution mean, the resilience improvement against a matched baseline run,
and precision/recall/F1 of the trusted-node identification attack.

View stability holds in a round when every non-Byzantine node's recorded
pollution — its Byzantine view fraction averaged over a short trailing
window — lies within 10 percentage points (absolute) of the mean. The
window exists because a single view of l1 entries carries binomial noise of
several points; at laptop scales (l1 around 100) the max instantaneous
deviation across hundreds of nodes sits near 15 points forever, which would
make the all-node bound unreachable no matter how converged the system is.
Averaging a handful of consecutive rounds measures the settled composition
each node records while leaving genuine divergence (transients, poisoned
views) plainly visible. Stability time is, by default, the first round from
which the bound holds through the end of the recorded trace; `mode="first"`
gives the first round that merely touches the bound.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adversary import identify_trusted
from .node import NodeClass

STABILITY_BOUND = 0.10
STABILITY_WINDOW = 10
DISCOVERY_THRESHOLD = 0.75


@dataclass(frozen=True)
class RoundMetrics:
    """One measured row of a run.

    mean/min/max/trusted/honest fractions describe the instantaneous views;
    max_abs_dev and stability_reached are computed over the trailing-window
    smoothed per-node fractions.
    """

    round_index: int
    mean_byz_fraction: float
    min_byz_fraction: float
    max_byz_fraction: float
    trusted_mean_byz_fraction: float | None
    honest_mean_byz_fraction: float | None
    discovery_fraction: float
    stability_reached: bool
    max_abs_dev: float
    rate_min: float | None
    rate_max: float | None
    rate_mean: float | None
    indegree_cv: float
    blocked_count: int


@dataclass(frozen=True)
class IdentReport:
    precision: float
    recall: float
    f1: float
    labeled_count: int


class MetricsCollector:
    """Per-run metrics accumulator.

    Call `collect(state)` once after population build and once after every
    round; it maintains the trailing window of per-node pollution fractions
    that the stability bound is evaluated over.
    """

    def __init__(
        self,
        stability_bound: float = STABILITY_BOUND,
        stability_window: int = STABILITY_WINDOW,
    ):
        self.stability_bound = stability_bound
        self._history: deque[np.ndarray] = deque(maxlen=stability_window)

    def collect(self, state) -> RoundMetrics:
        nodes = state.nodes
        byz_mask = state.byz_mask
        nonbyz = state.nonbyz_ids

        fractions = np.empty(len(nonbyz))
        classes = np.empty(len(nonbyz), dtype=object)
        discovery = 1.0
        id_chunks = []
        for k, i in enumerate(nonbyz):
            node = nodes[i]
            ids = node.view.ids
            fractions[k] = byz_mask[ids].mean() if ids.size else 0.0
            classes[k] = node.node_class
            discovery = min(discovery, node.seen_nonbyz / state.total_nonbyz)
            id_chunks.append(ids)

        self._history.append(fractions)
        smoothed = np.mean(self._history, axis=0)
        deviations = np.abs(smoothed - smoothed.mean())

        mean = float(fractions.mean())
        trusted_sel = classes == NodeClass.TRUSTED
        honest_sel = classes == NodeClass.HONEST
        rates = list(state.last_rates.values())
        indeg = np.bincount(np.concatenate(id_chunks), minlength=state.universe)[nonbyz]

        return RoundMetrics(
            round_index=state.round,
            mean_byz_fraction=mean,
            min_byz_fraction=float(fractions.min()),
            max_byz_fraction=float(fractions.max()),
            trusted_mean_byz_fraction=float(fractions[trusted_sel].mean()) if trusted_sel.any() else None,
            honest_mean_byz_fraction=float(fractions[honest_sel].mean()) if honest_sel.any() else None,
            discovery_fraction=float(discovery),
            stability_reached=bool(deviations.max() <= self.stability_bound),
            max_abs_dev=float(deviations.max()),
            rate_min=min(rates) if rates else None,
            rate_max=max(rates) if rates else None,
            rate_mean=float(np.mean(rates)) if rates else None,
            indegree_cv=float(indeg.std() / indeg.mean()) if indeg.mean() > 0 else 0.0,
            blocked_count=state.last_blocked,
        )


def discovery_time(rows: list[RoundMetrics], threshold: float = DISCOVERY_THRESHOLD) -> int | None:
    """First round where every node has seen at least `threshold` of the
    non-Byzantine ids; None if never reached."""
    for row in rows:
        if row.discovery_fraction >= threshold:
            return row.round_index
    return None


def stability_time(rows: list[RoundMetrics], mode: str = "persistent") -> int | None:
    """First round satisfying the view-stability bound.

    "persistent": the bound must hold from that round through the end of the
    trace. "first": first round touching the bound.
    """
    if mode == "first":
        for row in rows:
            if row.stability_reached:
                return row.round_index
        return None
    if mode != "persistent":
        raise ValueError(f"unknown stability mode {mode!r}")
    start = None
    for row in rows:
        if row.stability_reached:
            if start is None:
                start = row.round_index
        else:
            start = None
    return start


def post_stability_mean(rows: list[RoundMetrics], mode: str = "persistent") -> float | None:
    """Average mean Byzantine fraction over rounds at or after stability."""
    st = stability_time(rows, mode)
    if st is None:
        return None
    values = [r.mean_byz_fraction for r in rows if r.round_index >= st]
    return float(np.mean(values))


def resilience_improvement(
    trusted_rows: list[RoundMetrics],
    baseline_rows: list[RoundMetrics],
    mode: str = "persistent",
) -> float | None:
    """Relative drop in post-stability pollution against a matched baseline.

    Returns None when either trace never stabilizes or when the baseline is
    completely clean (improvement undefined). Negative values (the trusted
    run doing worse) are reported as-is.
    """
    trusted_mean = post_stability_mean(trusted_rows, mode)
    baseline_mean = post_stability_mean(baseline_rows, mode)
    if trusted_mean is None or baseline_mean is None:
        return None
    return improvement_from_means(baseline_mean, trusted_mean)


def improvement_from_means(baseline_mean: float, trusted_mean: float) -> float | None:
    if baseline_mean == 0:
        return None
    return (baseline_mean - trusted_mean) / baseline_mean


def ident_report(labeled: set[int], ground_truth_trusted: set[int]) -> IdentReport:
    """Precision/recall/F1 of an identification attack's labeling."""
    hits = len(labeled & ground_truth_trusted)
    precision = hits / len(labeled) if labeled else 0.0
    recall = hits / len(ground_truth_trusted) if ground_truth_trusted else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return IdentReport(precision, recall, f1, len(labeled))


def ident_labels_from_trace(trace, mode: str = "persistent") -> set[int]:
    """Run the labeling over observations collected up to view stability.

    The attack is pointless once views stabilized, so the campaign window
    ends at the stability round (or spans the whole run if stability was
    never reached).
    """
    if not trace.ident_history:
        return set()
    st = stability_time(trace.rows, mode)
    cutoff = len(trace.ident_history) - 1
    if st is not None and st >= 1:
        cutoff = min(cutoff, st - 1)
    sums, counts = trace.ident_history[cutoff]
    return identify_trusted((sums, counts), trace.ident_threshold)


def ident_report_from_trace(trace, mode: str = "persistent") -> IdentReport:
    labeled = ident_labels_from_trace(trace, mode)
    truth = set(int(i) for i in trace.trusted_ids) | set(int(i) for i in trace.poisoned_ids)
    return ident_report(labeled, truth)


ROUNDS_CSV_COLUMNS = [
    "run_id",
    "seed",
    "round",
    "n",
    "f",
    "t",
    "eviction_mode",
    "eviction_rate_or_adaptive",
    "mean_byz_fraction",
    "min_byz_fraction",
    "max_byz_fraction",
    "trusted_mean_byz_fraction",
    "honest_mean_byz_fraction",
    "discovery_fraction",
    "stability_reached",
]

SUMMARY_CSV_COLUMNS = [
    "run_id",
    "seed",
    "n",
    "f",
    "t",
    "eviction_mode",
    "eviction_rate_or_adaptive",
    "injection_fraction",
    "discovery_time",
    "stability_time",
    "post_stability_mean",
    "resilience_improvement",
    "ident_precision",
    "ident_recall",
    "ident_f1",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_rounds_csv(path: Path, run_id: str, trace) -> None:
    """Per-round CSV in the exact published column order (UTF-8, 6-decimal
    floats, newline-terminated rows)."""
    cfg = trace.config
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROUNDS_CSV_COLUMNS)
        for row in trace.rows:
            writer.writerow(
                [
                    run_id,
                    trace.seed,
                    row.round_index,
                    cfg.n,
                    _fmt(float(cfg.byzantine_fraction)),
                    _fmt(float(cfg.trusted_fraction)),
                    cfg.policy.mode,
                    cfg.policy.label(),
                    _fmt(row.mean_byz_fraction),
                    _fmt(row.min_byz_fraction),
                    _fmt(row.max_byz_fraction),
                    _fmt(row.trusted_mean_byz_fraction),
                    _fmt(row.honest_mean_byz_fraction),
                    _fmt(row.discovery_fraction),
                    _fmt(row.stability_reached),
                ]
            )


def write_summary_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in SUMMARY_CSV_COLUMNS])
