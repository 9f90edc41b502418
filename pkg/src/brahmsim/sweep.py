"""Sweep execution: grid expansion, baseline pairing, CSV output.

A sweep expands into runs over (f, t, eviction, injection, repetition). For
every (f, repetition) pair exactly one matched baseline (t=0, no trusted
machinery, same seed) is run so that each trusted run's resilience
improvement references a baseline with identical (n, f, seed).

Each run writes two files named after its full parameter tuple: the per-round
CSV and a JSON sidecar with the run's summary metrics. Existing file pairs
are skipped unless forced, making interrupted sweeps resumable; the summary
CSV is rebuilt from sidecars at the end of every invocation.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import metrics as metrics_mod
from .brahms import BrahmsParams
from .config import ExperimentConfig
from .engine import RunConfig, run_single
from .trusted import EvictionPolicy


@dataclass(frozen=True)
class SweepEntry:
    """One scheduled run within a sweep."""

    run_id: str
    config: RunConfig
    is_baseline: bool
    baseline_id: str | None  # run whose trace anchors the improvement metric


def _policy_for(eviction) -> EvictionPolicy:
    if eviction == "adaptive":
        return EvictionPolicy.adaptive()
    return EvictionPolicy.fixed(float(eviction))


def _run_id(n, f, t, policy_label, seed, injection) -> str:
    parts = [f"n{n}", f"f{float(f):.4f}", f"t{float(t):.4f}", f"ev-{policy_label}", f"seed{seed}"]
    if injection:
        parts.append(f"inj{float(injection):.4f}")
    return "_".join(parts)


def _policy_file_label(policy: EvictionPolicy) -> str:
    if policy.mode == "fixed":
        return f"fixed{policy.rate:.2f}"
    return policy.mode


def expand_sweep(config: ExperimentConfig) -> list[SweepEntry]:
    """All runs of a sweep: baselines first, then the trusted grid."""
    params = BrahmsParams(
        view_size=config.view_size,
        sampler_count=config.effective_sampler_count,
        push_share=config.push_share,
        pull_share=config.pull_share,
        history_share=config.history_share,
    )
    common = dict(
        n=config.population_size,
        params=params,
        rounds=config.rounds,
        push_budget_factor=config.push_budget_factor,
        ident_threshold=config.ident_threshold,
    )

    entries: list[SweepEntry] = []
    baseline_ids: dict[tuple[float, int], str] = {}
    for f in config.byzantine_fractions:
        for rep in range(config.repetitions):
            seed = config.seed + rep
            policy = EvictionPolicy.none()
            run_id = _run_id(config.population_size, f, 0.0, "baseline", seed, 0.0)
            baseline_ids[(f, rep)] = run_id
            entries.append(
                SweepEntry(
                    run_id=run_id,
                    config=RunConfig(
                        byzantine_fraction=f,
                        trusted_fraction=0.0,
                        policy=policy,
                        seed=seed,
                        **common,
                    ),
                    is_baseline=True,
                    baseline_id=None,
                )
            )

    injections: tuple[float, ...] = (0.0,) + tuple(config.injection_fractions)
    for f in config.byzantine_fractions:
        for t in config.trusted_fractions:
            for eviction in config.eviction_rates:
                policy = _policy_for(eviction)
                for injection in injections:
                    for rep in range(config.repetitions):
                        seed = config.seed + rep
                        run_id = _run_id(
                            config.population_size,
                            f,
                            t,
                            _policy_file_label(policy),
                            seed,
                            injection,
                        )
                        entries.append(
                            SweepEntry(
                                run_id=run_id,
                                config=RunConfig(
                                    byzantine_fraction=f,
                                    trusted_fraction=t,
                                    policy=policy,
                                    seed=seed,
                                    ident_attack=config.ident_attack,
                                    injection_fraction=injection,
                                    **common,
                                ),
                                is_baseline=False,
                                baseline_id=baseline_ids[(f, rep)],
                            )
                        )
    return entries


def execute_entry(entry: SweepEntry, out_dir: str) -> dict:
    """Run one entry and write its per-round CSV and summary sidecar."""
    trace = run_single(entry.config)
    rows = trace.rows
    cfg = entry.config
    summary = {
        "run_id": entry.run_id,
        "seed": cfg.seed,
        "n": cfg.n,
        "f": float(cfg.byzantine_fraction),
        "t": float(cfg.trusted_fraction),
        "eviction_mode": cfg.policy.mode,
        "eviction_rate_or_adaptive": cfg.policy.label(),
        "injection_fraction": float(cfg.injection_fraction),
        "is_baseline": entry.is_baseline,
        "baseline_id": entry.baseline_id,
        "discovery_time": metrics_mod.discovery_time(rows),
        "stability_time": metrics_mod.stability_time(rows),
        "post_stability_mean": metrics_mod.post_stability_mean(rows),
    }
    if cfg.ident_attack and not entry.is_baseline:
        report = metrics_mod.ident_report_from_trace(trace)
        summary["ident_precision"] = report.precision
        summary["ident_recall"] = report.recall
        summary["ident_f1"] = report.f1
    out = Path(out_dir)
    metrics_mod.write_rounds_csv(out / f"rounds_{entry.run_id}.csv", entry.run_id, trace)
    with open(out / f"meta_{entry.run_id}.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return summary


def _entry_done(entry: SweepEntry, out: Path) -> bool:
    return (out / f"rounds_{entry.run_id}.csv").exists() and (
        out / f"meta_{entry.run_id}.json"
    ).exists()


def _load_summary(entry: SweepEntry, out: Path) -> dict:
    with open(out / f"meta_{entry.run_id}.json", encoding="utf-8") as fh:
        return json.load(fh)


def run_sweep(config: ExperimentConfig, echo=print) -> int:
    """Execute a full sweep; returns a process exit status (0 ok, 1 failed)."""
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        echo(f"error: output directory {out} is not writable: {exc}")
        return 1

    entries = expand_sweep(config)
    pending = [e for e in entries if config.force or not _entry_done(e, out)]
    skipped = len(entries) - len(pending)
    if skipped:
        echo(f"skipping {skipped} completed runs (use force to redo)")

    summaries: dict[str, dict] = {}
    failures = 0
    if config.workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(execute_entry, e, str(out)): e for e in pending}
            for future, entry in futures.items():
                try:
                    summaries[entry.run_id] = future.result()
                except Exception as exc:  # pragma: no cover - worker crash path
                    failures += 1
                    echo(f"run {entry.run_id} failed: {exc}")
    else:
        for entry in pending:
            try:
                summaries[entry.run_id] = execute_entry(entry, str(out))
            except Exception as exc:
                failures += 1
                echo(f"run {entry.run_id} failed: {exc}")

    for entry in entries:
        if entry.run_id not in summaries and _entry_done(entry, out):
            summaries[entry.run_id] = _load_summary(entry, out)

    summary_rows = []
    for entry in entries:
        summary = summaries.get(entry.run_id)
        if summary is None:
            continue
        if not entry.is_baseline:
            base = summaries.get(entry.baseline_id)
            improvement = None
            if base is not None:
                mine = summary.get("post_stability_mean")
                theirs = base.get("post_stability_mean")
                if mine is not None and theirs is not None:
                    improvement = metrics_mod.improvement_from_means(theirs, mine)
            summary = dict(summary)
            summary["resilience_improvement"] = improvement
        summary_rows.append(summary)
        echo(
            f"{summary['run_id']}: stability={summary.get('stability_time')} "
            f"discovery={summary.get('discovery_time')} "
            f"post_mean={_short(summary.get('post_stability_mean'))} "
            f"improvement={_short(summary.get('resilience_improvement'))}"
        )

    metrics_mod.write_summary_csv(out / "summary.csv", summary_rows)
    return 1 if failures else 0


def _short(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"
