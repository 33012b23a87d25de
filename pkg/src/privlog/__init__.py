"""Differentially private release of process event logs."""

from privlog.errors import (
    LogParseError,
    LogValidationError,
    PrivlogError,
    UnboundableError,
    UnreleasableLogError,
)
from privlog.log_io import (
    Event,
    EventLog,
    RelativeTimes,
    Trace,
    compute_relative_times,
    parse_event_log,
    read_event_log,
    write_event_log,
)

__all__ = [
    "Event",
    "EventLog",
    "LogParseError",
    "LogValidationError",
    "PrivlogError",
    "RelativeTimes",
    "Trace",
    "UnboundableError",
    "UnreleasableLogError",
    "compute_relative_times",
    "parse_event_log",
    "read_event_log",
    "write_event_log",
]

__version__ = "0.1.0"
