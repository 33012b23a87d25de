"""Prior-knowledge estimation, risky-case filtering and epsilon calibration.

Every event belongs to one normalisation group: all case-start events form
a single group (their value is the start offset from the log start), every
other event is grouped by its automaton transition (value: gap to the
preceding event). Values are min-max normalised per group, so the range
entering the epsilon formula is 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from privlog.dafsa import AnnotatedLog, Transition, annotate
from privlog.errors import UnboundableError, UnreleasableLogError

log = logging.getLogger(__name__)

START_GROUP = "start"
DAY = 86_400


class Mode(str, Enum):
    SAMPLE = "sample"
    FILTER_SAMPLE = "filter_sample"
    OVERSAMPLE = "oversample"


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"guessing advantage must lie in (0, 1), got {delta}")


def worst_case_prior(delta: float) -> float:
    _check_delta(delta)
    return (1.0 - delta) / 2.0


def epsilon_from_advantage(prior: float, delta: float, value_range: float = 1.0) -> float:
    """Largest epsilon keeping the posterior-minus-prior guess probability within `delta`.

    Raises UnboundableError when ``prior + delta >= 1``.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"guessing advantage must lie in [0, 1), got {delta}")
    if not 0.0 < prior < 1.0:
        raise ValueError(f"prior must lie in (0, 1), got {prior}")
    if value_range <= 0:
        raise ValueError("value range must be positive")
    if prior + delta >= 1.0:
        raise UnboundableError(f"prior {prior} + delta {delta} >= 1")
    arg = prior / (1.0 - prior) * (1.0 / (delta + prior) - 1.0)
    return -math.log(arg) / value_range


def epsilon_oversampling(delta: float) -> float:
    """Epsilon for replication-only sampling (one-sided noise ``|z|``).

    Closed-form root of ``delta = exp(-e) * tanh(e / 4) + 1 - exp(-e)``.
    """
    _check_delta(delta)
    c = 6.0 ** (1.0 / 3.0)
    # the radicand and the cube-root argument both vanish as delta -> 1; clamp rounding noise
    radicand = max(0.0, 2 * delta**3 + 21 * delta**2 - 48 * delta + 25)
    inner = math.sqrt(3.0) * math.sqrt(radicand) - 9 * delta + 9
    if inner <= 0:
        return math.inf
    b = inner ** (1.0 / 3.0)
    return -2.0 * math.log(b / c**2 - (delta - 1.0) / (c * b))


def oversampling_advantage(epsilon: float) -> float:
    """Guessing advantage reached by one-sided noise at `epsilon` (inverse of the above)."""
    return math.exp(-epsilon) * math.tanh(epsilon / 4.0) + 1.0 - math.exp(-epsilon)


# -- groups and priors -------------------------------------------------------


@dataclass
class GroupStats:
    key: Transition | str
    values: np.ndarray
    precision: float = 1.0
    _sorted_norm: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == 0:
            raise ValueError(f"group {self.key} is empty")
        self._sorted_norm = np.sort(self.normalize(self.values))

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    @property
    def range(self) -> float:
        return self.max - self.min

    @property
    def degenerate(self) -> bool:
        return self.range == 0

    def normalize(self, x):
        if self.range == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return (np.asarray(x, dtype=float) - self.min) / self.range


def group_key(event) -> Transition | str:
    return START_GROUP if event.source == 0 else event.transition


def build_groups(
    annotated: AnnotatedLog, start_precision: float = DAY, time_precision: float = 10.0
) -> dict[Transition | str, GroupStats]:
    """Collect raw values per group; precisions (seconds) become fractions of each range."""
    values: dict[Transition | str, list[int]] = {}
    for ev in annotated.events():
        values.setdefault(group_key(ev), []).append(ev.rel_time)
    groups = {}
    for key, vals in values.items():
        g = GroupStats(key, vals)
        absolute = start_precision if key == START_GROUP else time_precision
        g.precision = 1.0 if g.degenerate else min(1.0, max(0.0, absolute / g.range))
        groups[key] = g
    return groups


def empirical_prior(group: GroupStats, value: float, delta: float | None = None) -> float:
    """Share of the group's normalised values within ``value +/- precision``.

    The window is closed, so an event always counts itself. Degenerate
    groups fall back to the worst-case prior, which needs `delta`.
    """
    if group.degenerate:
        if delta is None:
            raise ValueError("degenerate group needs delta for the worst-case prior")
        return worst_case_prior(delta)
    data = group._sorted_norm
    lo = np.searchsorted(data, value - group.precision, side="left")
    hi = np.searchsorted(data, value + group.precision, side="right")
    return float(hi - lo) / data.size


def estimate_priors(
    annotated: AnnotatedLog, delta: float, start_precision: float = DAY, time_precision: float = 10.0
) -> AnnotatedLog:
    """Return a copy of `annotated` with norm_time, precision and prior filled in."""
    groups = build_groups(annotated, start_precision, time_precision)
    # vectorised per group: searchsorted over all members at once
    members: dict[object, list[tuple[str, int]]] = {}
    for cid, evs in annotated.cases.items():
        for i, ev in enumerate(evs):
            members.setdefault(group_key(ev), []).append((cid, i))
    filled: dict[str, list] = {cid: list(evs) for cid, evs in annotated.cases.items()}
    for key, refs in members.items():
        g = groups[key]
        raw = np.array([annotated.cases[c][i].rel_time for c, i in refs], dtype=float)
        norm = g.normalize(raw)
        if g.degenerate:
            priors = np.full(norm.shape, worst_case_prior(delta))
        else:
            lo = np.searchsorted(g._sorted_norm, norm - g.precision, side="left")
            hi = np.searchsorted(g._sorted_norm, norm + g.precision, side="right")
            priors = (hi - lo) / g._sorted_norm.size
        for (c, i), n, p in zip(refs, norm, priors):
            filled[c][i] = replace(filled[c][i], norm_time=float(n), precision=g.precision, prior=float(p))
    return annotated.with_cases({cid: tuple(evs) for cid, evs in filled.items()})


# -- filtering ---------------------------------------------------------------


def risky_cases(annotated: AnnotatedLog, delta: float) -> list[str]:
    """Cases holding at least one event with ``prior + delta >= 1``."""
    return [
        cid
        for cid, evs in annotated.cases.items()
        if any(ev.prior is not None and ev.prior + delta >= 1.0 for ev in evs)
    ]


def drop_cases(annotated: AnnotatedLog, case_ids) -> AnnotatedLog:
    drop = set(case_ids)
    return annotated.with_cases({c: evs for c, evs in annotated.cases.items() if c not in drop})


def filter_cases(
    annotated: AnnotatedLog,
    delta: float,
    start_precision: float = DAY,
    time_precision: float = 10.0,
) -> tuple[AnnotatedLog, list[str]]:
    """Remove risky cases until none remain, re-estimating priors after each pass.

    `annotated` must already carry priors. The automaton is rebuilt over the
    surviving variants on every pass. Raises UnreleasableLogError when
    nothing survives.
    """
    filtered: list[str] = []
    current = annotated
    while True:
        risky = risky_cases(current, delta)
        if not risky:
            return current, filtered
        filtered.extend(risky)
        current = drop_cases(current, risky)
        if not current.cases:
            raise UnreleasableLogError(f"log unreleasable at delta={delta}: every case was filtered")
        log.debug("filtered %d cases; re-estimating priors", len(risky))
        relog = current.to_event_log()
        reannotated = annotate(relog)
        # relative times of the survivors are kept relative to the original log start
        reannotated = reannotated.with_cases(
            {
                cid: tuple(replace(a, rel_time=old.rel_time) for a, old in zip(evs, current.cases[cid]))
                for cid, evs in reannotated.cases.items()
            }
        )
        reannotated = replace(reannotated, log_start=current.log_start)
        current = estimate_priors(reannotated, delta, start_precision, time_precision)


# -- plan --------------------------------------------------------------------


@dataclass
class EpsilonPlan:
    delta: float
    epsilon_d: float
    mode: Mode
    event_epsilons: dict[str, list[float]]
    filtered_case_ids: list[str] = field(default_factory=list)
    group_ranges: dict[Transition | str, float] = field(default_factory=dict)
    longest_trace: int = 1
    scaled_by_trace_length: bool = False


def event_epsilon(prior: float, delta: float) -> float:
    """Per-event epsilon; infinite when the prior alone already exceeds 1 - delta."""
    if prior + delta >= 1.0:
        return math.inf
    if prior <= 0.0:
        return math.inf
    return epsilon_from_advantage(prior, delta, 1.0)


def build_epsilon_plan(
    annotated: AnnotatedLog,
    delta: float,
    mode: Mode | str = Mode.SAMPLE,
    start_precision: float = DAY,
    time_precision: float = 10.0,
    scale_by_trace_length: bool = False,
    filtered_case_ids: list[str] | None = None,
) -> tuple[EpsilonPlan, AnnotatedLog]:
    """Compute epsilon_d and a personalised epsilon_t for every event.

    Events are expected to carry priors; if they do not, priors are
    estimated here. Returns the plan and the log with epsilon_t filled in.
    """
    _check_delta(delta)
    mode = Mode(mode)
    if not annotated.cases:
        raise UnreleasableLogError("nothing to release")
    if any(ev.prior is None for ev in annotated.events()):
        annotated = estimate_priors(annotated, delta, start_precision, time_precision)
    groups = build_groups(annotated, start_precision, time_precision)
    longest = max(len(evs) for evs in annotated.cases.values())
    divisor = longest if scale_by_trace_length else 1

    epsilons: dict[str, list[float]] = {}
    cases = {}
    for cid, evs in annotated.cases.items():
        eps = [event_epsilon(ev.prior, delta) / divisor for ev in evs]
        epsilons[cid] = eps
        cases[cid] = tuple(replace(ev, epsilon_t=e) for ev, e in zip(evs, eps))

    if mode is Mode.OVERSAMPLE:
        epsilon_d = epsilon_oversampling(delta)
    else:
        epsilon_d = epsilon_from_advantage(worst_case_prior(delta), delta, 1.0)

    plan = EpsilonPlan(
        delta=delta,
        epsilon_d=epsilon_d,
        mode=mode,
        event_epsilons=epsilons,
        filtered_case_ids=list(filtered_case_ids or []),
        group_ranges={k: g.range for k, g in groups.items()},
        longest_trace=longest,
        scaled_by_trace_length=scale_by_trace_length,
    )
    return plan, annotated.with_cases(cases)
