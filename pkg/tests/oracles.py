"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import brentq, linprog


def trie_minimized_state_count(words) -> tuple[int, set]:
    """Build a prefix trie, minimise with Moore partition refinement.

    Returns the number of states of the minimal automaton (dead state
    excluded) and its accepted language.
    """
    words = {tuple(w) for w in words}
    trans: list[dict] = [{}]
    final = [False]
    for w in words:
        s = 0
        for a in w:
            if a not in trans[s]:
                trans.append({})
                final.append(False)
                trans[s][a] = len(trans) - 1
            s = trans[s][a]
        final[s] = True
    alphabet = sorted({a for w in words for a in w})
    dead = len(trans)
    n = dead + 1

    def step(s, a):
        return dead if s == dead else trans[s].get(a, dead)

    block = [1 if (s < dead and final[s]) else 0 for s in range(n)]
    while True:
        sigs = {}
        new = []
        for s in range(n):
            key = (block[s], tuple(block[step(s, a)] for a in alphabet))
            new.append(sigs.setdefault(key, len(sigs)))
        if len(set(new)) == len(set(block)):
            break
        block = new
    live_blocks = {block[s] for s in range(dead)}
    live_blocks.discard(block[dead])
    language = set()
    stack = [(0, ())]
    while stack:
        s, p = stack.pop()
        if final[s]:
            language.add(p)
        for a, t in trans[s].items():
            stack.append((t, p + (a,)))
    return len(live_blocks), language


def transport_emd(u, v) -> float:
    """Earth mover's distance by solving the transport LP between uniform weights."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    n, m = len(u), len(v)
    cost = np.abs(u[:, None] - v[None, :]).ravel()
    a_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros(n * m)
        row[i * m:(i + 1) * m] = 1
        a_eq.append(row)
        b_eq.append(1.0 / n)
    for j in range(m):
        row = np.zeros(n * m)
        row[j::m] = 1
        a_eq.append(row)
        b_eq.append(1.0 / m)
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=b_eq, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    assert res.success
    return float(res.fun)


def oversampling_epsilon_bisection(delta: float) -> float:
    def f(e):
        return math.exp(-e) * math.tanh(e / 4) + 1 - math.exp(-e) - delta

    return brentq(f, 1e-12, 200.0, xtol=1e-13, rtol=1e-13)


def count_in_window(values, t, p) -> float:
    return sum(1 for v in values if t - p <= v <= t + p) / len(values)


def isomorphic_transitions(ours, theirs) -> dict | None:
    """Find a state bijection mapping one transition set onto another."""
    our_states = sorted({s for t in ours for s in (t[0], t[2])})
    their_states = sorted({s for t in theirs for s in (t[0], t[2])})
    if len(our_states) != len(their_states):
        return None
    target = {(a, l, b) for a, l, b in theirs}
    for perm in itertools.permutations(their_states):
        f = dict(zip(our_states, perm))
        if {(f[a], l, f[b]) for a, l, b in ours} == target:
            return f
    return None
