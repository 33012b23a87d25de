"""Laplace moves over the transition table, case sampling, and time noise."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from privlog.calibration import DAY, EpsilonPlan, Mode, group_key
from privlog.dafsa import AnnotatedLog, Transition, TransitionVariantIndex
from privlog.log_io import Event, EventLog, Trace, Variant

log = logging.getLogger(__name__)

_STREAMS = {"draws": 0, "picks": 1, "time": 2, "ids": 3, "shuffle": 4}


class RandomStreams:
    """Independent generators derived from one master seed.

    Each named stage gets its own stream so that toggling one stage never
    shifts the draws of another. Extra integer keys give sub-streams (one
    per case copy for time noise).
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF

    def get(self, name: str, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(_STREAMS[name], *key))
        return np.random.default_rng(ss)


# -- Laplace -----------------------------------------------------------------


def laplace_inverse_cdf(u, scale: float):
    """Map u in (-1/2, 1/2) to a centred Laplace variate of the given scale."""
    u = np.asarray(u, dtype=float)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_samples(scale: float, rng: np.random.Generator, size: int) -> np.ndarray:
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    u = rng.random(size) - 0.5
    # u == -0.5 would give an infinite draw
    while np.any(u == -0.5):
        bad = u == -0.5
        u[bad] = rng.random(int(bad.sum())) - 0.5
    return laplace_inverse_cdf(u, scale)


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    return float(laplace_samples(scale, rng, 1)[0])


def laplace_cdf(x, scale: float):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 0.5 * np.exp(x / scale), 1.0 - 0.5 * np.exp(-x / scale))


def rounded_laplace_pmf(k, scale: float):
    """P(round(X) = k) for X ~ Lap(scale); round-half-to-even ties have measure zero."""
    k = np.asarray(k, dtype=float)
    return laplace_cdf(k + 0.5, scale) - laplace_cdf(k - 0.5, scale)


def draw_moves(transitions: list[Transition], epsilon_d: float, rng: np.random.Generator) -> dict[Transition, int]:
    """Integer case moves per transition: Lap(1/epsilon_d) rounded to nearest."""
    z = np.rint(laplace_samples(1.0 / epsilon_d, rng, len(transitions))).astype(int)
    return {t: int(v) for t, v in zip(transitions, z)}


# -- sampling ----------------------------------------------------------------


@dataclass
class CaseCopy:
    original_id: str
    ordinal: int
    copy_no: int
    variant: Variant
    durations: list[float]


@dataclass
class Draft:
    """Released cases before time noise and id regeneration."""

    source: AnnotatedLog
    copies: list[CaseCopy]
    index: TransitionVariantIndex
    epsilons: dict[tuple[str, int], list[float]] = field(default_factory=dict)
    iterations: int = 0
    unmet: list[Transition] = field(default_factory=list)
    compression_factor: float = 1.0

    def replica_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for c in self.copies:
            counts[c.original_id] = counts.get(c.original_id, 0) + 1
        return counts

    def variant_set(self) -> set[Variant]:
        return {c.variant for c in self.copies}

    def contingency_table(self) -> dict[Transition, int]:
        out: dict[Transition, int] = {}
        for c in self.copies:
            for t in self.index.path_of[c.variant]:
                out[t] = out.get(t, 0) + 1
        return out


def apply_sampling(
    annotated: AnnotatedLog,
    index: TransitionVariantIndex,
    draws: dict[Transition, int],
    rng: np.random.Generator,
    oversample: bool = False,
    max_iterations: int | None = None,
) -> Draft:
    """Replicate or delete whole cases until every transition has its noise.

    A transition is pending while ``|added| < |needed|`` and some live case
    still traverses it. Each round picks a pending transition (weighted by
    its original count) and moves ``needed - added`` cases through it, each
    case chosen by picking a variant weighted by its live case count. Every
    move updates the counters of all transitions on the moved case's path.
    With `oversample`, needs are ``|z|`` and only replications happen.
    """
    transitions = index.transitions
    tid = {t: i for i, t in enumerate(transitions)}
    need = np.array([draws.get(t, 0) for t in transitions], dtype=np.int64)
    if oversample:
        need = np.abs(need)
    added = np.zeros_like(need)
    ordinals = {cid: i for i, cid in enumerate(annotated.cases)}

    live: dict[Variant, list[CaseCopy]] = {}
    for v, cids in index.cases_of.items():
        live[v] = [
            CaseCopy(cid, ordinals[cid], 0, v, [float(a.rel_time) for a in annotated.cases[cid]])
            for cid in cids
        ]
    next_copy = {cid: 1 for cid in annotated.cases}
    path_idx = {v: np.array([tid[t] for t in p], dtype=np.int64) for v, p in index.path_of.items()}
    live_count = np.zeros(len(transitions), dtype=np.int64)
    for v, copies in live.items():
        live_count[path_idx[v]] += len(copies)
    weights = live_count.astype(float)

    if max_iterations is None:
        max_iterations = 20 * len(transitions) + 10 * int(np.abs(need).sum()) + 100
    iterations = 0
    while True:
        pending = np.flatnonzero((np.abs(added) < np.abs(need)) & (live_count > 0))
        if pending.size == 0:
            break
        if iterations >= max_iterations:
            log.warning("sampling stopped after %d rounds with %d transitions short of noise", iterations, pending.size)
            break
        iterations += 1
        w = weights[pending]
        i = int(pending[rng.choice(pending.size, p=w / w.sum())])
        remaining = int(need[i] - added[i])
        step = 1 if remaining > 0 else -1
        candidates = index.variants_of[transitions[i]]
        for _ in range(abs(remaining)):
            counts = np.array([len(live[v]) for v in candidates], dtype=float)
            total = counts.sum()
            if total == 0:
                break
            v = candidates[int(rng.choice(len(candidates), p=counts / total))]
            pool = live[v]
            j = int(rng.integers(len(pool)))
            if step > 0:
                src = pool[j]
                pool.append(
                    CaseCopy(src.original_id, src.ordinal, next_copy[src.original_id], v, list(src.durations))
                )
                next_copy[src.original_id] += 1
            else:
                pool[j] = pool[-1]
                pool.pop()
            added[path_idx[v]] += step
            live_count[path_idx[v]] += step

    for t, n, a in zip(transitions, need, added):
        index.needed_noise[t] = int(n)
        index.added_noise[t] = int(a)
    unmet = [t for t, n, a in zip(transitions, need, added) if abs(a) < abs(n)]
    copies = sorted((c for pool in live.values() for c in pool), key=lambda c: (c.ordinal, c.copy_no))
    return Draft(annotated, copies, index, iterations=iterations, unmet=unmet)


def apply_oversampling(annotated, index, draws, rng, max_iterations=None) -> Draft:
    return apply_sampling(annotated, index, draws, rng, oversample=True, max_iterations=max_iterations)


# -- time noise and post-processing -----------------------------------------


def inject_time_noise(draft: Draft, plan: EpsilonPlan, streams: RandomStreams) -> Draft:
    """Perturb every start offset and gap with personalised Laplace noise.

    A case released ``n`` times uses ``epsilon_t / n`` for each copy. Noise
    is drawn in normalised units and rescaled by the group's value range,
    then durations are clamped at zero.
    """
    replicas = draft.replica_counts()
    for copy in draft.copies:
        events = draft.source.cases[copy.original_id]
        n = replicas[copy.original_id]
        eps = [e / n for e in plan.event_epsilons[copy.original_id]]
        draft.epsilons[(copy.original_id, copy.copy_no)] = eps
        rng = streams.get("time", copy.ordinal, copy.copy_no)
        u = rng.random(len(events)) - 0.5
        u[u == -0.5] = 0.0
        noisy = []
        for ev, d, e, uk in zip(events, copy.durations, eps, u):
            spread = plan.group_ranges[group_key(ev)]
            if math.isinf(e) or spread == 0:
                noisy.append(d)
                continue
            noise = float(laplace_inverse_cdf(uk, 1.0 / e)) * spread
            noisy.append(max(0.0, d + noise))
        copy.durations = noisy
    return draft


def compression_factor(original_range_days: float, anonymized_range_days: float) -> float:
    total = original_range_days + anonymized_range_days
    if total == 0:
        return 1.0
    return original_range_days / total * 0.5


def compress_timestamps(draft: Draft, original_window: tuple[float, float]) -> Draft:
    """Scale case start offsets by the compression factor.

    `original_window` holds the first and last case start offsets (seconds)
    of the original log; ranges are compared in days.
    """
    if not draft.copies:
        return draft
    starts = [c.durations[0] for c in draft.copies]
    original_days = (original_window[1] - original_window[0]) / DAY
    anonymized_days = (max(starts) - min(starts)) / DAY
    factor = compression_factor(original_days, anonymized_days)
    for c in draft.copies:
        c.durations[0] *= factor
    draft.compression_factor = factor
    return draft


@dataclass
class ReleasedLog:
    log: EventLog
    event_epsilons: dict[str, list[float]]
    trace_epsilons: dict[str, float]
    replica_counts: dict[str, int]
    compression_factor: float = 1.0


def _fresh_ids(n: int, rng: np.random.Generator) -> list[str]:
    seen: set[str] = set()
    out = []
    while len(out) < n:
        cid = rng.bytes(16).hex()
        if cid not in seen:
            seen.add(cid)
            out.append(cid)
    return out


def finalize(draft: Draft, plan: EpsilonPlan, streams: RandomStreams, log_start: datetime | None = None) -> ReleasedLog:
    """Rebuild timestamps, assign fresh hex ids, and shuffle the cases."""
    start = log_start or draft.source.log_start
    replicas = draft.replica_counts()
    ids = _fresh_ids(len(draft.copies), streams.get("ids"))
    order = streams.get("shuffle").permutation(len(draft.copies))
    traces = []
    event_eps: dict[str, list[float]] = {}
    trace_eps: dict[str, float] = {}
    counts: dict[str, int] = {}
    for pos in order:
        copy = draft.copies[int(pos)]
        new_id = ids[int(pos)]
        acc = 0.0
        events = []
        for label, d in zip(copy.variant, copy.durations):
            acc += d
            events.append(Event(new_id, label, start + timedelta(seconds=round(acc))))
        traces.append(Trace(new_id, tuple(events)))
        eps = draft.epsilons.get((copy.original_id, copy.copy_no))
        if eps is None:
            eps = [e / replicas[copy.original_id] for e in plan.event_epsilons[copy.original_id]]
        event_eps[new_id] = eps
        trace_eps[new_id] = plan.epsilon_d
        counts[new_id] = replicas[copy.original_id]
    return ReleasedLog(EventLog(tuple(traces)), event_eps, trace_eps, counts, draft.compression_factor)


def sampling_draft(
    annotated: AnnotatedLog, index: TransitionVariantIndex, plan: EpsilonPlan, streams: RandomStreams
) -> Draft:
    """Draw per-transition moves and run the sampling loop for the plan's mode."""
    draws = draw_moves(index.transitions, plan.epsilon_d, streams.get("draws"))
    picks = streams.get("picks")
    if plan.mode is Mode.OVERSAMPLE:
        return apply_oversampling(annotated, index, draws, picks)
    return apply_sampling(annotated, index, draws, picks)
