"""Tick ingestion and synchronization onto regular intraday return grids.

Raw trades arrive as CSV rows with user-named columns. They are parsed
with an explicit IANA timezone (never guessed), filtered by a trading
calendar, sampled by the last-tick rule onto an evenly spaced price
grid, and differenced into log-return panels: one row per interval,
one column per instrument.

Grid convention: a session of length T seconds sampled every s seconds
yields N = T/s return intervals and N + 1 grid instants t_0..t_N.
Return i covers (t_i, t_{i+1}], so an event inside interval i is
stamped with the interval's left endpoint t_i.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from zoneinfo import ZoneInfo

import numpy as np

LOW_TRADE_BIN_SECONDS = 300  # the thin-day rule is always judged on 5-min bins


class ZeroValidRows(ValueError):
    """A tick file contained no parseable rows."""


class DayUnusable(ValueError):
    """No trade occurred inside the session; the day cannot be sampled."""


@dataclass(frozen=True)
class SessionSpec:
    """Trading session geometry: wall-clock window, timezone, grid step."""

    session_start: dt.time
    session_end: dt.time
    timezone: str
    sampling_interval: int

    def __post_init__(self):
        if self.session_start >= self.session_end:
            raise ValueError("session_start must precede session_end")
        if self.sampling_interval <= 0:
            raise ValueError("sampling_interval must be positive")
        if self.session_seconds % self.sampling_interval != 0:
            raise ValueError("sampling_interval must divide the session length")
        ZoneInfo(self.timezone)  # fail fast on unknown zone names

    @property
    def session_seconds(self) -> int:
        start = self.session_start
        end = self.session_end
        return (end.hour - start.hour) * 3600 + (end.minute - start.minute) * 60 + (
            end.second - start.second
        )

    @property
    def n_intervals(self) -> int:
        return self.session_seconds // self.sampling_interval

    def tzinfo(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)

    def grid_instants(self, date: dt.date) -> list[dt.datetime]:
        """The N + 1 aware grid instants of one session day."""
        base = dt.datetime.combine(date, self.session_start, tzinfo=self.tzinfo())
        step = dt.timedelta(seconds=self.sampling_interval)
        return [base + i * step for i in range(self.n_intervals + 1)]


@dataclass(frozen=True)
class TickRecord:
    timestamp: dt.datetime
    price: float
    volume: int
    instrument: str


@dataclass
class TickSeries:
    """Parsed trades of one instrument, sorted by time."""

    instrument: str
    records: list
    rejected: int = 0
    total_rows: int = 0
    diagnostics: list = field(default_factory=list)

    def dates(self) -> list:
        return sorted({r.timestamp.date() for r in self.records})


@dataclass(frozen=True)
class TradingCalendar:
    excluded_dates: frozenset = frozenset()
    low_trade_threshold: float = 0.60

    def __post_init__(self):
        if not (0.0 < self.low_trade_threshold <= 1.0):
            raise ValueError("low_trade_threshold must lie in (0, 1]")


@dataclass
class ReturnPanel:
    """One day's synchronized log returns, d instruments by N intervals."""

    date: dt.date
    instruments: list
    returns: np.ndarray
    grid_times: list
    backfilled: dict = field(default_factory=dict)

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.ndim != 2 or self.returns.shape[0] != len(self.instruments):
            raise ValueError("returns must be a d x N matrix matching instruments")
        if len(self.grid_times) != self.returns.shape[1] + 1:
            raise ValueError("grid_times must hold N + 1 instants")
        if not np.all(np.isfinite(self.returns)):
            raise ValueError("returns must be finite")

    @property
    def n_intervals(self) -> int:
        return self.returns.shape[1]

    def series(self, instrument: str) -> np.ndarray:
        return self.returns[self.instruments.index(instrument)]


def parse_ticks(path, schema: dict, timezone: str, instrument: str = "") -> TickSeries:
    """Parse one instrument's trades from a CSV file.

    ``schema`` maps the roles "timestamp", "price", "volume" (and
    optionally "instrument") to column names in the file's header.
    Naive timestamps are localized to ``timezone``; rows that fail to
    parse, or carry a non-positive price, are rejected and counted.
    """
    for role in ("timestamp", "price"):
        if role not in schema:
            raise ValueError(f"schema must name a {role} column")
    tz = ZoneInfo(timezone)
    records = []
    rejected = 0
    diagnostics = []
    total = 0
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise OSError(f"cannot read tick file {path}: {exc}") from exc
    with handle:
        reader = csv.DictReader(handle)
        for lineno, row in enumerate(reader, start=2):
            total += 1
            try:
                stamp = dt.datetime.fromisoformat(row[schema["timestamp"]].strip())
                price = float(row[schema["price"]])
                vol_col = schema.get("volume")
                volume = int(float(row[vol_col])) if vol_col else 0
                name = row[schema["instrument"]].strip() if "instrument" in schema else instrument
            except (KeyError, TypeError, ValueError) as exc:
                rejected += 1
                diagnostics.append(f"line {lineno}: {exc}")
                continue
            if price <= 0.0 or volume < 0:
                rejected += 1
                diagnostics.append(f"line {lineno}: invalid price/volume {price}/{volume}")
                continue
            if stamp.tzinfo is None:
                stamp = stamp.replace(tzinfo=tz)
            else:
                stamp = stamp.astimezone(tz)
            records.append(TickRecord(stamp, price, volume, name or instrument))
    if not records:
        raise ZeroValidRows(f"{path}: no valid tick rows ({rejected} rejected)")
    records.sort(key=lambda r: r.timestamp)
    return TickSeries(
        instrument=instrument or records[0].instrument,
        records=records,
        rejected=rejected,
        total_rows=total,
        diagnostics=diagnostics,
    )


def split_by_instrument(series: TickSeries) -> dict:
    """Split a combined-file TickSeries on the instrument field."""
    out: dict = {}
    for rec in series.records:
        out.setdefault(rec.instrument, []).append(rec)
    return {
        name: TickSeries(instrument=name, records=recs, rejected=0, total_rows=len(recs))
        for name, recs in out.items()
    }


def _day_records(ticks: TickSeries, spec: SessionSpec, date: dt.date) -> list:
    return [r for r in ticks.records if r.timestamp.astimezone(spec.tzinfo()).date() == date]


def sample_last_tick(ticks: TickSeries, spec: SessionSpec, date: dt.date):
    """Last-tick sampling of one day onto the session grid.

    Returns (prices, backfilled): N + 1 prices where grid point t holds
    the last trade at or before t. Grid points before the day's first
    trade are back-filled with that first price and flagged. Raises
    DayUnusable when no trade falls inside [session_start, session_end].
    """
    grid = spec.grid_instants(date)
    day = _day_records(ticks, spec, date)
    in_session = [r for r in day if grid[0] <= r.timestamp <= grid[-1]]
    if not in_session:
        raise DayUnusable(f"{ticks.instrument} {date}: no session trades")
    prices = np.empty(len(grid))
    backfilled = False
    last_price = None
    idx = 0
    for k, t in enumerate(grid):
        while idx < len(day) and day[idx].timestamp <= t:
            last_price = day[idx].price
            idx += 1
        if last_price is None:
            prices[k] = day[0].price
            backfilled = True
        else:
            prices[k] = last_price
    return prices, backfilled


def trade_fraction(ticks: TickSeries, spec: SessionSpec, date: dt.date) -> float:
    """Fraction of the session's 5-minute bins containing at least one trade."""
    grid = spec.grid_instants(date)
    start, end = grid[0], grid[-1]
    n_bins = max(1, spec.session_seconds // LOW_TRADE_BIN_SECONDS)
    hit = set()
    for r in _day_records(ticks, spec, date):
        if start < r.timestamp <= end:
            offset = (r.timestamp - start).total_seconds()
            hit.add(min(n_bins - 1, int(offset // LOW_TRADE_BIN_SECONDS)))
    return len(hit) / n_bins


def build_panel(price_grids: dict, date: dt.date, spec: SessionSpec, backfilled=None) -> ReturnPanel:
    """Log-return panel from per-instrument price grids of one day."""
    instruments = list(price_grids)
    n = spec.n_intervals
    returns = np.empty((len(instruments), n))
    for i, name in enumerate(instruments):
        prices = np.asarray(price_grids[name], dtype=float)
        if prices.shape != (n + 1,):
            raise ValueError(f"{name}: price grid must hold N + 1 prices")
        if np.any(prices <= 0.0):
            raise ValueError(f"{name}: non-positive price on the grid")
        returns[i] = np.diff(np.log(prices))
    return ReturnPanel(
        date=date,
        instruments=instruments,
        returns=returns,
        grid_times=spec.grid_instants(date),
        backfilled=dict(backfilled or {}),
    )


def build_panels(tick_series: dict, spec: SessionSpec, calendar: TradingCalendar):
    """Per-day panels from parsed ticks, with a drop log.

    A date is dropped when it is excluded by the calendar, when any
    instrument has no usable session trades, or when every instrument
    falls below the low-trade threshold (thin days are only discarded
    if all legs are thin).
    """
    all_dates = sorted({d for s in tick_series.values() for d in s.dates()})
    panels = []
    drop_log = []
    for date in all_dates:
        if date in calendar.excluded_dates:
            drop_log.append((date, "excluded_date"))
            continue
        missing = [n for n, s in tick_series.items() if not _day_records(s, spec, date)]
        if missing:
            drop_log.append((date, f"missing_instrument:{','.join(sorted(missing))}"))
            continue
        fractions = {n: trade_fraction(s, spec, date) for n, s in tick_series.items()}
        if all(f < calendar.low_trade_threshold for f in fractions.values()):
            drop_log.append((date, "low_trade"))
            continue
        grids = {}
        flags = {}
        unusable = None
        for name, series in tick_series.items():
            try:
                grids[name], flags[name] = sample_last_tick(series, spec, date)
            except DayUnusable as exc:
                unusable = str(exc)
                break
        if unusable is not None:
            drop_log.append((date, f"unusable:{unusable}"))
            continue
        panels.append(build_panel(grids, date, spec, backfilled=flags))
    return panels, drop_log


def write_panel_csv(panel: ReturnPanel, path) -> None:
    """One day's returns: date, interval left endpoint, one column per leg."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "grid_time"] + list(panel.instruments))
        for i in range(panel.n_intervals):
            stamp = panel.grid_times[i].strftime("%H:%M:%S")
            row = [panel.date.isoformat(), stamp]
            row.extend(repr(float(v)) for v in panel.returns[:, i])
            writer.writerow(row)


def read_panel_csv(path, spec: SessionSpec) -> ReturnPanel:
    """Rebuild a ReturnPanel written by write_panel_csv."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header[:2] != ["date", "grid_time"]:
            raise ValueError(f"{path}: not a panel file")
        instruments = header[2:]
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: empty panel")
    date = dt.date.fromisoformat(rows[0][0])
    returns = np.array([[float(v) for v in row[2:]] for row in rows]).T
    return ReturnPanel(
        date=date,
        instruments=instruments,
        returns=returns,
        grid_times=spec.grid_instants(date),
    )


def write_drop_log(drop_log, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "reason"])
        for date, reason in drop_log:
            writer.writerow([date.isoformat(), reason])
