"""Reading, writing and time decomposition of event logs.

Only the three core attributes (case id, activity, timestamp) survive
parsing. Timestamps are held as timezone-aware UTC datetimes truncated to
whole seconds; naive inputs are read as UTC.
"""

from __future__ import annotations

import csv
import gzip
import io
import math
import re
import xml.etree.ElementTree as ET
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import BinaryIO, Union

from privlog.errors import LogParseError, LogValidationError

Variant = tuple[str, ...]
Source = Union[BinaryIO, bytes, str, Path]

DEFAULT_COLUMNS = {"case_id": "case_id", "activity": "activity", "timestamp": "timestamp"}

_FALLBACK_FORMATS = (
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
    "%d.%m.%Y %H:%M:%S",
    "%d.%m.%Y %H:%M",
    "%Y/%m/%d %H:%M:%S",
)
_FRACTION = re.compile(r"(\d{2}:\d{2}:\d{2})\.(\d+)")


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 (or common day-first/month-first) timestamp to UTC seconds."""
    raw = text.strip()
    if not raw:
        raise ValueError("empty timestamp")
    iso = raw[:-1] + "+00:00" if raw.endswith(("Z", "z")) else raw
    # fromisoformat on 3.10 only takes 3 or 6 fractional digits
    iso = _FRACTION.sub(lambda m: f"{m.group(1)}.{(m.group(2) + '000000')[:6]}", iso)
    try:
        ts = datetime.fromisoformat(iso)
    except ValueError:
        for fmt in _FALLBACK_FORMATS:
            try:
                ts = datetime.strptime(raw, fmt)
                break
            except ValueError:
                continue
        else:
            raise ValueError(f"unrecognised timestamp {text!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True, slots=True)
class Event:
    case_id: str
    activity: str
    timestamp: datetime


@dataclass(frozen=True, slots=True)
class Trace:
    case_id: str
    events: tuple[Event, ...]

    @property
    def variant(self) -> Variant:
        return tuple(e.activity for e in self.events)

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True, eq=False)
class EventLog:
    """A set of traces; equality ignores trace order."""

    traces: tuple[Trace, ...]

    def __eq__(self, other):
        if not isinstance(other, EventLog):
            return NotImplemented
        return {t.case_id: t for t in self.traces} == {t.case_id: t for t in other.traces}

    __hash__ = None

    def __post_init__(self):
        seen = set()
        for trace in self.traces:
            if trace.case_id in seen:
                raise LogValidationError(f"duplicate case id {trace.case_id!r}")
            seen.add(trace.case_id)

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "EventLog":
        """Group events by case (first-appearance order) and sort each case by time.

        The sort is stable, so equal timestamps keep their input order.
        """
        grouped: dict[str, list[Event]] = {}
        for e in events:
            grouped.setdefault(e.case_id, []).append(e)
        return cls(
            tuple(
                Trace(cid, tuple(sorted(evs, key=lambda e: e.timestamp)))
                for cid, evs in grouped.items()
            )
        )

    @property
    def log_start(self) -> datetime:
        return min(t.events[0].timestamp for t in self.traces)

    @property
    def log_end(self) -> datetime:
        return max(t.events[-1].timestamp for t in self.traces)

    @property
    def n_events(self) -> int:
        return sum(len(t) for t in self.traces)

    def variants(self) -> dict[Variant, list[str]]:
        """Map each case variant to the ids of the cases that follow it."""
        out: dict[Variant, list[str]] = {}
        for t in self.traces:
            out.setdefault(t.variant, []).append(t.case_id)
        return out

    def variant_set(self) -> set[Variant]:
        return {t.variant for t in self.traces}

    def trace(self, case_id: str) -> Trace:
        for t in self.traces:
            if t.case_id == case_id:
                return t
        raise KeyError(case_id)

    def __len__(self) -> int:
        return len(self.traces)


@dataclass(frozen=True)
class RelativeTimes:
    """Per-case start offset from the log start plus gaps to the preceding event.

    All durations are integral seconds.
    """

    log_start: datetime
    start_offsets: dict[str, int]
    deltas: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def durations(self, case_id: str) -> list[int]:
        """One value per event: the start offset, then each predecessor gap."""
        return [self.start_offsets[case_id], *self.deltas[case_id]]

    def reconstruct(self, case_id: str) -> list[datetime]:
        out = []
        acc = 0
        for d in self.durations(case_id):
            acc += d
            out.append(self.log_start + timedelta(seconds=acc))
        return out


def compute_relative_times(log: EventLog) -> RelativeTimes:
    start = log.log_start
    offsets: dict[str, int] = {}
    deltas: dict[str, tuple[int, ...]] = {}
    for trace in log.traces:
        stamps = [e.timestamp for e in trace.events]
        offsets[trace.case_id] = int((stamps[0] - start).total_seconds())
        deltas[trace.case_id] = tuple(
            int((b - a).total_seconds()) for a, b in zip(stamps, stamps[1:])
        )
    return RelativeTimes(start, offsets, deltas)


# -- parsing -----------------------------------------------------------------


def _open_binary(source: Source) -> BinaryIO:
    if isinstance(source, (bytes, bytearray)):
        stream: BinaryIO = io.BytesIO(source)
    elif isinstance(source, (str, Path)):
        stream = open(source, "rb")
    else:
        stream = source
    head = stream.peek(2)[:2] if hasattr(stream, "peek") else b""
    if head == b"\x1f\x8b":
        return gzip.GzipFile(fileobj=stream)
    if not head and stream.seekable():
        pos = stream.tell()
        head = stream.read(2)
        stream.seek(pos)
        if head == b"\x1f\x8b":
            return gzip.GzipFile(fileobj=stream)
    return stream


def guess_format(path: Union[str, Path]) -> str:
    name = str(path).lower()
    if name.endswith((".xes", ".xes.gz")):
        return "xes"
    if name.endswith((".csv", ".csv.gz")):
        return "csv"
    raise LogValidationError(f"cannot infer log format from {path!s}; pass format explicitly")


def parse_event_log(
    source: Source, format: str = "xes", column_map: Mapping[str, str] | None = None
) -> EventLog:
    """Parse an XES or CSV event log.

    `source` may be a binary stream, raw bytes, or a filesystem path
    (gzip-compressed input is detected automatically). For CSV,
    `column_map` maps the logical names ``case_id``, ``activity`` and
    ``timestamp`` to header names.
    """
    if format not in ("xes", "csv"):
        raise LogValidationError(f"unsupported format {format!r}")
    stream = _open_binary(source)
    try:
        events = _parse_xes(stream) if format == "xes" else _parse_csv(stream, column_map)
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
    if not events:
        raise LogValidationError("event log is empty")
    return EventLog.from_events(events)


def read_event_log(path: Union[str, Path], format: str | None = None, column_map=None) -> EventLog:
    return parse_event_log(Path(path), format or guess_format(path), column_map)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_xes(stream: BinaryIO) -> list[Event]:
    events: list[Event] = []
    pending: list[tuple[str | None, str | None, int]] = []
    depth = 0
    trace_no = 0
    event_no = 0
    trace_name: str | None = None
    in_event = False
    try:
        for kind, elem in ET.iterparse(stream, events=("start", "end")):
            tag = _local(elem.tag)
            if kind == "start":
                if tag == "trace":
                    depth += 1
                    trace_name = None
                    pending = []
                    event_no = 0
                elif tag == "event":
                    in_event = True
                continue
            if tag == "event" and depth:
                in_event = False
                activity = timestamp = None
                for child in elem:
                    key = child.get("key")
                    if key == "concept:name":
                        activity = child.get("value")
                    elif key == "time:timestamp":
                        timestamp = child.get("value")
                pending.append((activity, timestamp, event_no))
                event_no += 1
                elem.clear()
            elif tag == "string" and depth and not in_event and elem.get("key") == "concept:name":
                trace_name = elem.get("value")
            elif tag == "trace":
                depth -= 1
                case_id = trace_name if trace_name is not None else str(trace_no)
                for activity, timestamp, idx in pending:
                    events.append(_make_event(case_id, activity, timestamp, f"trace {case_id!r} event {idx}"))
                trace_no += 1
                elem.clear()
    except ET.ParseError as exc:
        line, col = exc.position
        raise LogParseError(f"malformed XES: {exc}", f"line {line}, column {col}") from exc
    return events


def _make_event(case_id, activity, timestamp, where) -> Event:
    if not activity:
        raise LogValidationError(f"missing activity label in {where}")
    if not timestamp:
        raise LogValidationError(f"missing timestamp in {where}")
    try:
        ts = parse_timestamp(timestamp)
    except ValueError as exc:
        raise LogValidationError(f"{exc} in {where}") from exc
    return Event(str(case_id), activity, ts)


def _parse_csv(stream: BinaryIO, column_map: Mapping[str, str] | None) -> list[Event]:
    columns = dict(DEFAULT_COLUMNS)
    if column_map:
        columns.update(column_map)
    try:
        text = io.TextIOWrapper(stream, encoding="utf-8-sig", newline="")
        reader = csv.reader(text)
        header = next(reader, None)
        if header is None:
            raise LogValidationError("event log is empty")
        header = [h.strip() for h in header]
        try:
            idx = {k: header.index(v) for k, v in columns.items()}
        except ValueError:
            missing = [v for v in columns.values() if v not in header]
            raise LogParseError(f"CSV header lacks column(s) {missing}", "line 1") from None
        events = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            if len(row) < len(header):
                raise LogParseError(f"expected {len(header)} fields, got {len(row)}", f"line {line}")
            events.append(
                _make_event(
                    row[idx["case_id"]].strip(),
                    row[idx["activity"]].strip(),
                    row[idx["timestamp"]].strip(),
                    f"line {line}",
                )
            )
        return events
    except (csv.Error, UnicodeDecodeError) as exc:
        raise LogParseError(f"malformed CSV: {exc}") from exc


# -- writing -----------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def write_event_log(
    log: EventLog,
    sink: BinaryIO | str | Path,
    format: str = "xes",
    event_epsilons: Mapping[str, Sequence[float]] | None = None,
    trace_epsilons: Mapping[str, float] | None = None,
) -> None:
    """Serialise `log`, optionally with per-event and per-case epsilon attributes.

    CSV output lists events in chronological order (stable on ties);
    XES output keeps the trace order of `log`.
    """
    if format not in ("xes", "csv"):
        raise LogValidationError(f"unsupported format {format!r}")
    data = (
        _xes_bytes(log, event_epsilons, trace_epsilons)
        if format == "xes"
        else _csv_bytes(log, event_epsilons, trace_epsilons)
    )
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(data)
    else:
        sink.write(data)


def dumps_event_log(log: EventLog, format: str = "xes", **extras) -> bytes:
    buf = io.BytesIO()
    write_event_log(log, buf, format, **extras)
    return buf.getvalue()


def _csv_bytes(log, event_eps, trace_eps) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["case_id", "activity", "timestamp"]
    if event_eps:
        header.append("epsilon_per_event")
    if trace_eps:
        header.append("epsilon_per_trace")
    writer.writerow(header)
    rows = []
    for trace in log.traces:
        for i, e in enumerate(trace.events):
            row = [e.case_id, e.activity, format_timestamp(e.timestamp)]
            if event_eps:
                row.append(_fmt_float(event_eps[trace.case_id][i]))
            if trace_eps:
                row.append(_fmt_float(trace_eps[trace.case_id]))
            rows.append((e.timestamp, row))
    rows.sort(key=lambda r: r[0])
    writer.writerows(r for _, r in rows)
    return buf.getvalue().encode("utf-8")


def _xes_bytes(log, event_eps, trace_eps) -> bytes:
    root = ET.Element("log", {"xes.version": "1.0", "xes.features": "", "xmlns": "http://www.xes-standard.org/"})
    ET.SubElement(root, "extension", {"name": "Concept", "prefix": "concept", "uri": "http://www.xes-standard.org/concept.xesext"})
    ET.SubElement(root, "extension", {"name": "Time", "prefix": "time", "uri": "http://www.xes-standard.org/time.xesext"})
    for trace in log.traces:
        t_el = ET.SubElement(root, "trace")
        ET.SubElement(t_el, "string", {"key": "concept:name", "value": trace.case_id})
        if trace_eps:
            ET.SubElement(t_el, "float", {"key": "epsilon_per_trace", "value": _fmt_float(trace_eps[trace.case_id])})
        for i, e in enumerate(trace.events):
            e_el = ET.SubElement(t_el, "event")
            ET.SubElement(e_el, "string", {"key": "concept:name", "value": e.activity})
            ET.SubElement(e_el, "date", {"key": "time:timestamp", "value": e.timestamp.isoformat(timespec="milliseconds")})
            if event_eps:
                ET.SubElement(e_el, "float", {"key": "epsilon_per_event", "value": _fmt_float(event_eps[trace.case_id][i])})
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"
