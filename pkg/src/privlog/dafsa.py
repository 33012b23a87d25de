"""Minimal DAFSA over case variants and the log annotations derived from it."""

from __future__ import annotations

from collections import Counter, deque
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import NamedTuple

from privlog.errors import LogValidationError
from privlog.log_io import Event, EventLog, RelativeTimes, Variant, compute_relative_times


class Transition(NamedTuple):
    source: int
    label: str
    target: int

    def __str__(self) -> str:
        return f"s{self.source}-{self.label}->s{self.target}"


@dataclass(frozen=True)
class Dafsa:
    """Deterministic acyclic automaton; state 0 is initial.

    ``edges[s]`` maps an activity label to the successor of state ``s``.
    """

    edges: tuple[dict[str, int], ...]
    finals: frozenset[int]
    initial: int = 0

    @property
    def n_states(self) -> int:
        return len(self.edges)

    @property
    def transitions(self) -> list[Transition]:
        return [
            Transition(s, label, t)
            for s, out in enumerate(self.edges)
            for label, t in sorted(out.items())
        ]

    def path(self, word: Iterable[str]) -> list[Transition]:
        """Transitions visited when replaying `word`; raises if it is not accepted."""
        state = self.initial
        out = []
        for label in word:
            nxt = self.edges[state].get(label)
            if nxt is None:
                raise LogValidationError(f"variant {tuple(word)!r} leaves the automaton at s{state}")
            out.append(Transition(state, label, nxt))
            state = nxt
        if state not in self.finals:
            raise LogValidationError(f"variant {tuple(word)!r} does not end in a final state")
        return out

    def accepts(self, word: Iterable[str]) -> bool:
        try:
            self.path(word)
        except LogValidationError:
            return False
        return True

    def words(self) -> Iterator[Variant]:
        """Enumerate the accepted language (exponential in general; for tests)."""
        stack: list[tuple[int, Variant]] = [(self.initial, ())]
        while stack:
            state, prefix = stack.pop()
            if state in self.finals and prefix:
                yield prefix
            for label, nxt in self.edges[state].items():
                stack.append((nxt, prefix + (label,)))

    def in_degree(self) -> list[int]:
        deg = [0] * self.n_states
        for out in self.edges:
            for t in out.values():
                deg[t] += 1
        return deg

    def to_dot(self) -> str:
        lines = ["digraph dafsa {", "  rankdir=LR;"]
        for s in range(self.n_states):
            shape = "doublecircle" if s in self.finals else "circle"
            lines.append(f'  s{s} [shape={shape}, label="s{s}"];')
        for tr in self.transitions:
            label = tr.label.replace('"', '\\"')
            lines.append(f'  s{tr.source} -> s{tr.target} [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_minimal_dafsa(variants: Iterable[Iterable[str]]) -> Dafsa:
    """Incremental construction over sorted words (Daciuk et al., 2000).

    Words are inserted in lexicographic order; after each insertion the
    part of the previous word that can no longer change is merged into a
    register of equivalent states, which keeps the automaton minimal.
    """
    words = sorted({tuple(w) for w in variants})
    if not words:
        raise LogValidationError("cannot build an automaton from an empty variant set")
    if any(len(w) == 0 for w in words):
        raise LogValidationError("case variants must be non-empty")

    edges: list[dict[str, int]] = [{}]
    last_label: list[str | None] = [None]
    finals: set[int] = set()
    register: dict[tuple, int] = {}

    def signature(state):
        return (state in finals, tuple(sorted(edges[state].items())))

    def replace_or_register(state):
        # walk the chain of most recently added children, then merge bottom-up
        chain = [state]
        while last_label[chain[-1]] is not None:
            chain.append(edges[chain[-1]][last_label[chain[-1]]])
        for parent, child in zip(reversed(chain[:-1]), reversed(chain[1:])):
            sig = signature(child)
            found = register.get(sig)
            if found is not None and found != child:
                edges[parent][last_label[parent]] = found
                edges[child] = {}  # orphaned
            else:
                register[sig] = child
        # registered states are frozen; forget the chain so it is not revisited
        for s in chain:
            last_label[s] = None

    for word in words:
        state = 0
        i = 0
        while i < len(word) and word[i] in edges[state]:
            state = edges[state][word[i]]
            i += 1
        if last_label[state] is not None:
            replace_or_register(state)
        for label in word[i:]:
            edges.append({})
            last_label.append(None)
            new = len(edges) - 1
            edges[state][label] = new
            last_label[state] = label
            state = new
        finals.add(state)
    replace_or_register(0)
    return _canonical(edges, finals)


def _canonical(edges: list[dict[str, int]], finals: set[int]) -> Dafsa:
    """Renumber reachable states in breadth-first order from the root."""
    order = {0: 0}
    queue = deque([0])
    while queue:
        s = queue.popleft()
        for label in sorted(edges[s]):
            t = edges[s][label]
            if t not in order:
                order[t] = len(order)
                queue.append(t)
    new_edges: list[dict[str, int]] = [{} for _ in order]
    for old, new in order.items():
        new_edges[new] = {label: order[t] for label, t in sorted(edges[old].items())}
    return Dafsa(tuple(new_edges), frozenset(order[s] for s in finals if s in order))


def common_prefixes_suffixes(dafsa: Dafsa) -> tuple[set[Variant], set[Variant]]:
    """Prefixes of branching states and suffixes of merging states.

    A prefix is common when it leads into a state with more than one
    outgoing transition; a suffix is common when it leaves a state with
    more than one incoming transition. Empty sequences are omitted.
    """
    indeg = dafsa.in_degree()
    prefixes_of: list[set[Variant]] = [set() for _ in range(dafsa.n_states)]
    prefixes_of[dafsa.initial].add(())
    # states are numbered breadth-first, but a topological order is needed
    for s in _topological(dafsa):
        for label, t in dafsa.edges[s].items():
            prefixes_of[t].update(p + (label,) for p in prefixes_of[s])
    suffixes_of: list[set[Variant]] = [set() for _ in range(dafsa.n_states)]
    for s in reversed(_topological(dafsa)):
        if s in dafsa.finals:
            suffixes_of[s].add(())
        for label, t in dafsa.edges[s].items():
            suffixes_of[s].update((label,) + x for x in suffixes_of[t])

    prefixes = set()
    suffixes = set()
    for s in range(dafsa.n_states):
        if len(dafsa.edges[s]) > 1:
            prefixes.update(p for p in prefixes_of[s] if p)
        if indeg[s] > 1:
            suffixes.update(x for x in suffixes_of[s] if x)
    return prefixes, suffixes


def _topological(dafsa: Dafsa) -> list[int]:
    indeg = dafsa.in_degree()
    queue = deque(s for s in range(dafsa.n_states) if indeg[s] == 0)
    order = []
    while queue:
        s = queue.popleft()
        order.append(s)
        for t in dafsa.edges[s].values():
            indeg[t] -= 1
            if indeg[t] == 0:
                queue.append(t)
    return order


# -- annotation --------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class AnnotatedEvent:
    event: Event
    source: int
    target: int
    rel_time: int
    norm_time: float | None = None
    precision: float | None = None
    prior: float | None = None
    epsilon_t: float | None = None

    @property
    def transition(self) -> Transition:
        return Transition(self.source, self.event.activity, self.target)


@dataclass(frozen=True)
class AnnotatedLog:
    dafsa: Dafsa
    log_start: datetime
    cases: dict[str, tuple[AnnotatedEvent, ...]] = field(default_factory=dict)

    def events(self) -> Iterator[AnnotatedEvent]:
        for evs in self.cases.values():
            yield from evs

    @property
    def n_events(self) -> int:
        return sum(len(evs) for evs in self.cases.values())

    def variant(self, case_id: str) -> Variant:
        return tuple(a.event.activity for a in self.cases[case_id])

    def to_event_log(self) -> EventLog:
        from privlog.log_io import Trace

        return EventLog(tuple(Trace(cid, tuple(a.event for a in evs)) for cid, evs in self.cases.items()))

    def with_cases(self, cases: dict[str, tuple[AnnotatedEvent, ...]]) -> "AnnotatedLog":
        return replace(self, cases=cases)

    def __len__(self) -> int:
        return len(self.cases)


def annotate_log(log: EventLog, times: RelativeTimes, dafsa: Dafsa) -> AnnotatedLog:
    cases = {}
    for trace in log.traces:
        path = dafsa.path(trace.variant)
        durations = times.durations(trace.case_id)
        cases[trace.case_id] = tuple(
            AnnotatedEvent(e, tr.source, tr.target, d)
            for e, tr, d in zip(trace.events, path, durations)
        )
    return AnnotatedLog(dafsa, times.log_start, cases)


def annotate(log: EventLog, times: RelativeTimes | None = None) -> AnnotatedLog:
    """Build the automaton for `log` and annotate it in one step."""
    if times is None:
        times = compute_relative_times(log)
    dafsa = build_minimal_dafsa(log.variants())
    return annotate_log(log, times, dafsa)


def contingency_table(annotated: AnnotatedLog) -> dict[Transition, int]:
    return dict(Counter(a.transition for a in annotated.events()))


@dataclass
class TransitionVariantIndex:
    """Transition to variant to case lookup plus the sampling loop's counters."""

    transitions: list[Transition]
    variants_of: dict[Transition, list[Variant]]
    cases_of: dict[Variant, list[str]]
    path_of: dict[Variant, tuple[Transition, ...]]
    needed_noise: dict[Transition, int]
    added_noise: dict[Transition, int]


def build_variant_index(annotated: AnnotatedLog, dafsa: Dafsa | None = None) -> TransitionVariantIndex:
    dafsa = dafsa or annotated.dafsa
    cases_of: dict[Variant, list[str]] = {}
    for cid in annotated.cases:
        cases_of.setdefault(annotated.variant(cid), []).append(cid)
    path_of = {v: tuple(dafsa.path(v)) for v in cases_of}
    variants_of: dict[Transition, list[Variant]] = {}
    for v in sorted(cases_of):
        for tr in path_of[v]:
            variants_of.setdefault(tr, []).append(v)
    transitions = sorted(variants_of)
    return TransitionVariantIndex(
        transitions=transitions,
        variants_of=variants_of,
        cases_of=cases_of,
        path_of=path_of,
        needed_noise={t: 0 for t in transitions},
        added_noise={t: 0 for t in transitions},
    )
