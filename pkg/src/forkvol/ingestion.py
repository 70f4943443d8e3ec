"""Load, validate, align and persist price series.

Price CSV contract: header ``date,close``, ISO dates, decimal closes,
UTF-8, LF line endings. The fetch client mirrors the same validation and
caches results to CSV so reruns are offline-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import threading
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

__all__ = [
    "PricePoint",
    "Panel",
    "IngestionError",
    "FetchError",
    "read_prices",
    "write_prices",
    "align",
    "fetch_prices",
]


class IngestionError(ValueError):
    pass


class FetchError(RuntimeError):
    """Fetch failure; ``retriable`` distinguishes transient network faults
    from permanent schema mismatches."""

    def __init__(self, message, retriable: bool):
        super().__init__(message)
        self.retriable = retriable


@dataclass(frozen=True)
class PricePoint:
    date: date
    close: float

    def __post_init__(self):
        if not self.close > 0:
            raise IngestionError(f"non-positive price {self.close} on {self.date}")


@dataclass(frozen=True)
class Panel:
    """Date-aligned close prices for the asset and, optionally, the index."""

    dates: tuple[date, ...]
    asset_close: np.ndarray
    index_close: np.ndarray | None
    dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "asset_close", np.asarray(self.asset_close, float))
        if self.index_close is not None:
            object.__setattr__(self, "index_close", np.asarray(self.index_close, float))
            if self.index_close.shape[0] != len(self.dates):
                raise IngestionError("index column length mismatch")
        if self.asset_close.shape[0] != len(self.dates):
            raise IngestionError("asset column length mismatch")
        if len(set(self.dates)) != len(self.dates):
            raise IngestionError("duplicate dates in panel")

    def asset_as_points(self) -> list[PricePoint]:
        return [PricePoint(d, float(c)) for d, c in zip(self.dates, self.asset_close)]


def _parse_row(row, line_no) -> PricePoint:
    if len(row) != 2:
        raise IngestionError(f"malformed row at line {line_no}: expected 2 fields")
    try:
        d = date.fromisoformat(row[0].strip())
    except ValueError:
        raise IngestionError(f"bad date {row[0]!r} at line {line_no}") from None
    try:
        close = float(row[1])
    except ValueError:
        raise IngestionError(f"bad price {row[1]!r} at line {line_no}") from None
    if not close > 0:
        raise IngestionError(f"non-positive price at line {line_no}")
    return PricePoint(d, close)


def read_prices(path, source_label: str = "") -> list[PricePoint]:
    """Parse a ``date,close`` CSV, sorted ascending; duplicates rejected."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"price file not found: {path}")
    label = source_label or str(path)
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "close"]:
            raise IngestionError(f"{label}: expected header 'date,close'")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            points.append(_parse_row(row, line_no))
    points.sort(key=lambda p: p.date)
    for prev, cur in zip(points, points[1:]):
        if prev.date == cur.date:
            raise IngestionError(f"{label}: duplicate date {cur.date}")
    return points


def write_prices(points, path) -> None:
    """Persist a series in the canonical CSV form (LF endings, repr floats)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("date,close\n")
        for p in points:
            fh.write(f"{p.date.isoformat()},{p.close!r}\n")


def align(asset, index=None) -> Panel:
    """Inner-join asset and index closes on date."""
    if not asset:
        raise IngestionError("empty asset series")
    if index is None:
        return Panel(
            dates=tuple(p.date for p in asset),
            asset_close=np.array([p.close for p in asset]),
            index_close=None,
        )
    if not index:
        raise IngestionError("empty index series")
    index_by_date = {p.date: p.close for p in index}
    kept = [(p.date, p.close, index_by_date[p.date]) for p in asset if p.date in index_by_date]
    if not kept:
        raise IngestionError("empty intersection of asset and index dates")
    dropped = (len(asset) - len(kept)) + (len(index) - len(kept))
    dates, asset_close, index_close = zip(*kept)
    return Panel(
        dates=tuple(dates),
        asset_close=np.array(asset_close),
        index_close=np.array(index_close),
        dropped=dropped,
    )


_fetch_locks: dict[tuple[str, str], threading.Lock] = {}
_fetch_locks_guard = threading.Lock()


def _lock_for(endpoint: str, symbol: str) -> threading.Lock:
    with _fetch_locks_guard:
        return _fetch_locks.setdefault((endpoint, symbol), threading.Lock())


def cache_path(cache_dir, endpoint: str, symbol: str, start: date, end: date) -> Path:
    key = hashlib.sha256(f"{endpoint}|{symbol}|{start}|{end}".encode()).hexdigest()[:16]
    return Path(cache_dir) / f"{symbol}_{start}_{end}_{key}.csv"


def fetch_prices(
    endpoint: str,
    symbol: str,
    start: date,
    end: date,
    *,
    cache_dir,
    session=None,
    timeout: float = 30.0,
) -> list[PricePoint]:
    """GET a JSON array of ``{"date": ..., "close": ...}`` records.

    Responses are validated like read_prices and written to a cache CSV
    keyed by (endpoint, symbol, range); a warm cache short-circuits the
    network entirely. At most one request per (endpoint, symbol) is in
    flight at a time.
    """
    cached = cache_path(cache_dir, endpoint, symbol, start, end)
    if cached.exists():
        return read_prices(cached, source_label=f"cache:{symbol}")

    with _lock_for(endpoint, symbol):
        if cached.exists():  # raced with another caller
            return read_prices(cached, source_label=f"cache:{symbol}")
        url = endpoint.format(symbol=symbol, start=start.isoformat(), end=end.isoformat())
        if session is None:
            import requests

            session = requests
        try:
            resp = session.get(url, timeout=timeout)
        except Exception as exc:
            raise FetchError(f"network failure fetching {symbol}: {exc}", retriable=True)
        if getattr(resp, "status_code", 200) >= 500:
            raise FetchError(f"server error {resp.status_code} for {symbol}", retriable=True)
        if getattr(resp, "status_code", 200) >= 400:
            raise FetchError(f"client error {resp.status_code} for {symbol}", retriable=False)
        try:
            records = resp.json()
        except Exception:
            raise FetchError(f"non-JSON response for {symbol}", retriable=False)
        if not isinstance(records, list):
            raise FetchError("expected a JSON array of records", retriable=False)
        points = []
        for i, rec in enumerate(records):
            for field in ("date", "close"):
                if not isinstance(rec, dict) or field not in rec:
                    raise FetchError(f"record {i} missing field '{field}'", retriable=False)
            try:
                d = date.fromisoformat(str(rec["date"]))
                close = float(rec["close"])
            except (ValueError, TypeError):
                raise FetchError(f"record {i} has unparseable date/close", retriable=False)
            if not close > 0:
                raise FetchError(f"record {i} has non-positive close", retriable=False)
            points.append(PricePoint(d, close))
        points.sort(key=lambda p: p.date)
        for prev, cur in zip(points, points[1:]):
            if prev.date == cur.date:
                raise FetchError(f"duplicate date {cur.date} in response", retriable=False)
        write_prices(points, cached)
        return points
