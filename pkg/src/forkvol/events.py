"""Fork calendar: event records, day regressors, cluster labels.

The package ships two transcribed calendars as fixtures: ``forks.csv``
(the full fork list) and ``hard_forks.csv`` (the 22 hard forks).
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from datetime import date
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "EventRecord",
    "EventRegressors",
    "ClusterLabel",
    "read_events",
    "bundled_calendar",
    "build_regressors",
    "filter_hard",
    "classify_clusters",
]

KINDS = ("hard", "soft", "unknown")


@dataclass(frozen=True)
class EventRecord:
    date: date
    name: str
    ticker: str
    kind: str = "unknown"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class EventRegressors:
    """D(t) indicator and C(t) count aligned to a date axis.

    ``dropped`` counts events that fell outside the axis (or could not be
    attributed under the chosen policy).
    """

    dates: tuple[date, ...]
    dummy: np.ndarray
    count: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dummy", np.asarray(self.dummy, float))
        object.__setattr__(self, "count", np.asarray(self.count, float))
        n = len(self.dates)
        if self.dummy.shape[0] != n or self.count.shape[0] != n:
            raise ValueError("regressor length mismatch")
        if not np.array_equal(self.dummy, (self.count >= 1).astype(float)):
            raise ValueError("dummy must indicate count >= 1")


@dataclass(frozen=True)
class ClusterLabel:
    event_date: date
    is_followed: bool
    same_day_count: int

    def __post_init__(self):
        if self.same_day_count < 1:
            raise ValueError("same_day_count must be >= 1")


def read_events(path) -> list[EventRecord]:
    """Parse an event CSV with header ``date,name,ticker,kind``."""
    path = Path(path)
    if not path.exists():
        raise ValueError(f"event file not found: {path}")
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"date", "name", "ticker", "kind"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise ValueError(f"{path}: expected header date,name,ticker,kind")
        for i, row in enumerate(reader, start=2):
            try:
                d = date.fromisoformat(row["date"].strip())
            except ValueError:
                raise ValueError(f"{path}: bad date at line {i}") from None
            records.append(
                EventRecord(d, row["name"].strip(), row["ticker"].strip(), row["kind"].strip())
            )
    records.sort(key=lambda r: (r.date, r.ticker))
    return records


def bundled_calendar(which: str = "all") -> list[EventRecord]:
    """Load a fixture calendar: 'all' (full fork list) or 'hard' (22 hard forks)."""
    name = {"all": "forks.csv", "hard": "hard_forks.csv"}.get(which)
    if name is None:
        raise ValueError(f"unknown calendar {which!r}")
    with resources.as_file(resources.files("forkvol.data") / name) as p:
        return read_events(p)


def build_regressors(calendar, dates, policy: str = "next_day") -> EventRegressors:
    """Aggregate a calendar onto a date axis.

    C(t) counts events attributed to day t; D(t) = 1 iff C(t) >= 1. Events
    on a day missing from the axis are shifted forward to the next
    available day under policy 'next_day', or discarded under 'drop'.
    Events outside the axis range are always discarded (counted in
    ``dropped``).
    """
    if policy not in ("drop", "next_day"):
        raise ValueError(f"bad policy {policy!r}")
    dates = tuple(dates)
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise ValueError("date axis must be strictly increasing")
    index = {d: i for i, d in enumerate(dates)}
    sorted_dates = list(dates)
    count = np.zeros(len(dates))
    dropped = 0
    for ev in calendar:
        if ev.date in index:
            count[index[ev.date]] += 1
            continue
        if policy == "drop":
            dropped += 1
            continue
        pos = bisect.bisect_left(sorted_dates, ev.date)
        if pos >= len(sorted_dates):
            dropped += 1
            continue
        if ev.date < sorted_dates[0]:
            dropped += 1  # before the sample; shifting in would predate the event
            continue
        count[pos] += 1
    dummy = (count >= 1).astype(float)
    return EventRegressors(dates=dates, dummy=dummy, count=count, dropped=dropped)


def filter_hard(calendar) -> list[EventRecord]:
    return [ev for ev in calendar if ev.kind == "hard"]


def classify_clusters(calendar, window_days: int = 3) -> list[ClusterLabel]:
    """Label each distinct event date: followed by another event within
    ``window_days``, and how many events share that date."""
    if window_days < 1:
        raise ValueError(f"window_days must be >= 1, got {window_days}")
    counts: dict[date, int] = {}
    for ev in calendar:
        counts[ev.date] = counts.get(ev.date, 0) + 1
    distinct = sorted(counts)
    labels = []
    for i, d in enumerate(distinct):
        followed = any(
            0 < (d2 - d).days <= window_days for d2 in distinct[i + 1 :]
        )
        labels.append(ClusterLabel(event_date=d, is_followed=followed, same_day_count=counts[d]))
    return labels
