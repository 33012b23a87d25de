"""Utility loss between an original and a released log."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from privlog.log_io import EventLog

MONTH_SECONDS = 30 * 24 * 3600


def jaccard_distance(a: set, b: set) -> float:
    union = a | b
    if not union:
        return 0.0
    return 1.0 - len(a & b) / len(union)


def jaccard_variants(a: EventLog, b: EventLog) -> float:
    return jaccard_distance(a.variant_set(), b.variant_set())


@dataclass
class Dfg:
    frequency: dict[tuple[str, str], int]
    total_time: dict[tuple[str, str], float]  # months

    @property
    def nodes(self) -> set[str]:
        return {x for arc in self.frequency for x in arc}


def build_dfg(log: EventLog) -> Dfg:
    freq: dict[tuple[str, str], int] = {}
    time: dict[tuple[str, str], float] = {}
    for trace in log.traces:
        for a, b in zip(trace.events, trace.events[1:]):
            arc = (a.activity, b.activity)
            freq[arc] = freq.get(arc, 0) + 1
            time[arc] = time.get(arc, 0.0) + (b.timestamp - a.timestamp).total_seconds() / MONTH_SECONDS
    return Dfg(freq, time)


def emd(u, v) -> float:
    """1-D Wasserstein distance between the empirical distributions of `u` and `v`.

    Computed as the integral of the absolute difference of the two CDFs.
    """
    u = np.sort(np.asarray(u, dtype=float))
    v = np.sort(np.asarray(v, dtype=float))
    if u.size == 0 or v.size == 0:
        raise ValueError("EMD needs two non-empty samples")
    points = np.concatenate([u, v])
    points.sort(kind="mergesort")
    widths = np.diff(points)
    cdf_u = np.searchsorted(u, points[:-1], side="right") / u.size
    cdf_v = np.searchsorted(v, points[:-1], side="right") / v.size
    return float(np.sum(np.abs(cdf_u - cdf_v) * widths))


@dataclass
class MetricsReport:
    jaccard: float
    emd_freq: float
    emd_time_months: float
    variants_original: int
    variants_released: int
    false_negatives: int
    false_positives: int
    emd_operands: str = "arc weights aligned on the arc-key union, absent arcs weigh 0"

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self, header: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(self.to_dict()), lineterminator="\n")
        if header:
            writer.writeheader()
        writer.writerow(self.to_dict())
        return buf.getvalue()


def _aligned(a: dict, b: dict) -> tuple[list[float], list[float]]:
    keys = sorted(set(a) | set(b))
    return [float(a.get(k, 0)) for k in keys], [float(b.get(k, 0)) for k in keys]


def evaluate(original: EventLog, released: EventLog) -> MetricsReport:
    va, vb = original.variant_set(), released.variant_set()
    da, db = build_dfg(original), build_dfg(released)
    if da.frequency or db.frequency:
        fu, fv = _aligned(da.frequency, db.frequency)
        tu, tv = _aligned(da.total_time, db.total_time)
        emd_freq, emd_time = emd(fu, fv), emd(tu, tv)
    else:
        emd_freq = emd_time = 0.0
    return MetricsReport(
        jaccard=jaccard_distance(va, vb),
        emd_freq=emd_freq,
        emd_time_months=emd_time,
        variants_original=len(va),
        variants_released=len(vb),
        false_negatives=len(va - vb),
        false_positives=len(vb - va),
    )
