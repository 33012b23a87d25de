import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privlog.log_io import EventLog, Trace
from privlog.metrics import MONTH_SECONDS, build_dfg, emd, evaluate, jaccard_distance, jaccard_variants

from conftest import synthetic_log
from oracles import transport_emd


def _without(log, case_ids):
    return EventLog(tuple(t for t in log.traces if t.case_id not in set(case_ids)))


def _doubled(log):
    extra = tuple(
        Trace(t.case_id + "b", tuple(replace(e, case_id=t.case_id + "b") for e in t.events)) for t in log.traces
    )
    return EventLog(log.traces + extra)


def test_jaccard_examples(worked):
    assert jaccard_variants(worked, worked) == 0
    assert jaccard_distance({"ABC", "AEC"}, {"ABC"}) == 0.5
    assert jaccard_distance({"ABC"}, {"DAEC"}) == 1
    assert jaccard_distance(set(), set()) == 0


@settings(max_examples=100)
@given(st.sets(st.integers(0, 9)), st.sets(st.integers(0, 9)))
def test_jaccard_properties(a, b):
    d = jaccard_distance(a, b)
    assert 0 <= d <= 1
    assert d == jaccard_distance(b, a)
    if a and b:
        assert (d == 0) == (a == b)


def test_dfg_worked_log(worked):
    dfg = build_dfg(worked)
    assert dfg.frequency[("A", "B")] == 4
    assert dfg.frequency[("D", "A")] == 2
    assert sum(dfg.frequency.values()) == worked.n_events - len(worked)
    assert dfg.total_time[("A", "E")] > 0


def test_dfg_time_in_months(worked):
    one = EventLog(tuple(t for t in worked.traces if t.case_id == "1"))
    assert build_dfg(one).total_time[("A", "B")] == pytest.approx(30 * 60 / MONTH_SECONDS)


def test_dfg_single_events():
    log = synthetic_log(random.Random(0), n_cases=5, max_len=1)
    assert build_dfg(log).frequency == {}


def test_dfg_doubles(worked):
    a, b = build_dfg(worked), build_dfg(_doubled(worked))
    assert b.frequency == {k: 2 * v for k, v in a.frequency.items()}
    assert b.total_time == pytest.approx({k: 2 * v for k, v in a.total_time.items()})


@pytest.mark.parametrize("u, v, expected", [([1, 2, 3], [1, 2, 3], 0), ([0], [5], 5), ([1, 3], [2, 2], 1.0)])
def test_emd_examples(u, v, expected):
    assert emd(u, v) == pytest.approx(expected, abs=1e-12)
    assert transport_emd(u, v) == pytest.approx(expected, abs=1e-9)


def test_emd_empty():
    with pytest.raises(ValueError):
        emd([], [1])


multiset = st.lists(st.integers(0, 20).map(float), min_size=1, max_size=6)


@settings(max_examples=60, deadline=None)
@given(multiset, multiset, multiset)
def test_emd_metric(u, v, w):
    assert emd(u, v) == pytest.approx(emd(v, u), abs=1e-12)
    assert emd(u, v) == pytest.approx(transport_emd(u, v), abs=1e-9)
    assert emd(u, w) <= emd(u, v) + emd(v, w) + 1e-9
    assert (emd(u, v) < 1e-12) == _same_distribution(u, v)


def _same_distribution(u, v):
    from collections import Counter
    from fractions import Fraction

    cu, cv = Counter(u), Counter(v)
    return {k: Fraction(n, len(u)) for k, n in cu.items()} == {k: Fraction(n, len(v)) for k, n in cv.items()}


def test_evaluate_identity(worked):
    r = evaluate(worked, worked)
    assert (r.jaccard, r.emd_freq, r.emd_time_months) == (0, 0, 0)
    assert r.false_negatives == r.false_positives == 0


def test_evaluate_missing_variant(worked):
    r = evaluate(worked, _without(worked, ["2"]))
    assert r.jaccard == pytest.approx(1 / 4)
    assert (r.false_negatives, r.false_positives) == (1, 0)
    assert r.variants_original == 4 and r.variants_released == 3


def test_evaluate_shifted_arc_against_lp(worked):
    released = _doubled(EventLog(tuple(t for t in worked.traces if t.case_id in {"1", "3"})))
    released = EventLog(released.traces + tuple(t for t in worked.traces if t.case_id not in {"1", "3"}))
    a, b = build_dfg(worked), build_dfg(released)
    keys = sorted(set(a.frequency) | set(b.frequency))
    u = [a.frequency.get(k, 0) for k in keys]
    v = [b.frequency.get(k, 0) for k in keys]
    r = evaluate(worked, released)
    assert r.emd_freq == pytest.approx(transport_emd(u, v), abs=1e-9)
    assert r.emd_freq > 0


def test_report_csv_row(worked):
    row = evaluate(worked, worked).csv_row(header=True).splitlines()
    assert row[0].startswith("jaccard,emd_freq,emd_time_months")
    assert len(row) == 2
