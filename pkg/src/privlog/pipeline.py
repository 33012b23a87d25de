"""End-to-end release of one log."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from privlog.anonymizer import (
    RandomStreams,
    ReleasedLog,
    compress_timestamps,
    finalize,
    inject_time_noise,
    sampling_draft,
)
from privlog.calibration import DAY, EpsilonPlan, Mode, build_epsilon_plan, estimate_priors, filter_cases
from privlog.dafsa import AnnotatedLog, annotate_log, build_minimal_dafsa, build_variant_index, contingency_table
from privlog.log_io import EventLog, compute_relative_times

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    input: Path | None = None
    output: Path | None = None
    format: str | None = None
    delta: float = 0.3
    mode: Mode = Mode.FILTER_SAMPLE
    start_precision: float = DAY
    time_precision: float = 10.0
    compress: bool = True
    scale_by_trace_length: bool = False
    seed: int = 0
    report: Path | None = None
    workers: int = 1

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.start_precision <= 0 or self.time_precision <= 0:
            raise ValueError("precisions must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class Release:
    released: ReleasedLog
    plan: EpsilonPlan
    annotated: AnnotatedLog
    report: dict = field(default_factory=dict)
    runtime_seconds: float = 0.0


def _json_float(x: float):
    return "inf" if math.isinf(x) else round(x, 12)


def anonymize(log_in: EventLog, config: RunConfig) -> Release:
    """Run the full pipeline on an in-memory log.

    Steps: relative times, automaton, annotation, priors, optional
    filtering, epsilon plan, transition moves, case sampling, time noise,
    optional compression, fresh ids.
    """
    started = time.perf_counter()
    streams = RandomStreams(config.seed)
    times = compute_relative_times(log_in)
    dafsa = build_minimal_dafsa(log_in.variants())
    annotated = annotate_log(log_in, times, dafsa)
    annotated = estimate_priors(annotated, config.delta, config.start_precision, config.time_precision)

    filtered: list[str] = []
    if config.mode is Mode.FILTER_SAMPLE:
        annotated, filtered = filter_cases(annotated, config.delta, config.start_precision, config.time_precision)

    plan, annotated = build_epsilon_plan(
        annotated,
        config.delta,
        config.mode,
        config.start_precision,
        config.time_precision,
        config.scale_by_trace_length,
        filtered,
    )
    index = build_variant_index(annotated)
    draft = sampling_draft(annotated, index, plan, streams)
    draft = inject_time_noise(draft, plan, streams)
    if config.compress:
        starts = list(times.start_offsets.values())
        draft = compress_timestamps(draft, (min(starts), max(starts)))
    released = finalize(draft, plan, streams, log_start=times.log_start)
    runtime = time.perf_counter() - started
    log.info("anonymized %d events in %.3f s", log_in.n_events, runtime)

    table = contingency_table(annotated)
    per_tr = {}
    for ev in annotated.events():
        per_tr.setdefault(ev.transition, []).append(ev.epsilon_t)
    transitions = []
    for t in index.transitions:
        eps = per_tr[t]
        finite = [e for e in eps if not math.isinf(e)]
        transitions.append(
            {
                "transition": str(t),
                "source": t.source,
                "activity": t.label,
                "target": t.target,
                "count": table[t],
                "needed_noise": index.needed_noise[t],
                "added_noise": index.added_noise[t],
                "min_epsilon_t": _json_float(min(eps)),
                "mean_epsilon_t": _json_float(sum(finite) / len(finite)) if finite else "inf",
            }
        )
    report = {
        "delta": config.delta,
        "epsilon_d": round(plan.epsilon_d, 12),
        "mode": config.mode.value,
        "seed": config.seed,
        "start_precision_seconds": config.start_precision,
        "time_precision_seconds": config.time_precision,
        "scale_by_trace_length": config.scale_by_trace_length,
        "compress": config.compress,
        "compression_factor": round(draft.compression_factor, 12),
        "cases_in": len(log_in),
        "events_in": log_in.n_events,
        "filtered_case_count": len(filtered),
        "cases_out": len(released.log),
        "events_out": released.log.n_events,
        "sampling_rounds": draft.iterations,
        "unmet_transitions": [str(t) for t in draft.unmet],
        "dafsa_states": annotated.dafsa.n_states,
        "transitions": transitions,
    }
    return Release(released, plan, annotated, report, runtime)


def inspect_log(log_in: EventLog) -> dict:
    """Counts, automaton size and transition table of a log."""
    times = compute_relative_times(log_in)
    dafsa = build_minimal_dafsa(log_in.variants())
    annotated = annotate_log(log_in, times, dafsa)
    table = contingency_table(annotated)
    return {
        "traces": len(log_in),
        "events": log_in.n_events,
        "variants": len(log_in.variant_set()),
        "dafsa_states": dafsa.n_states,
        "dafsa_transitions": len(dafsa.transitions),
        "contingency_table": [
            {"source": t.source, "activity": t.label, "target": t.target, "count": table[t]}
            for t in sorted(table)
        ],
    }
