"""One-minute volume bars and mid-price log returns.

Bars are half-open ``[start, end)`` buckets over the trading session. Volumes
are side-blind share totals per aggregation category; the closing mid is the
last two-sided level-1 mid observed strictly before the bar end, carried
forward within a day.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import EventOutsideSession, ParseError, UnalignedInputs
from .lobster import NS_PER_SECOND, BookFrame, BookSnapshot, EventType, MessageFrame, OrderFlowEvent

log = logging.getLogger(__name__)


class Category(str, enum.Enum):
    TRADE = "trade"
    LIMIT = "limit"
    CANCEL = "cancel"


CATEGORIES = tuple(Category)


@dataclass(frozen=True)
class SessionSpec:
    open_time: int = 34_200
    close_time: int = 57_600
    bar_width: int = 60

    def __post_init__(self):
        if self.close_time <= self.open_time:
            raise ValueError("close_time must be after open_time")
        if self.bar_width <= 0 or (self.close_time - self.open_time) % self.bar_width:
            raise ValueError("session length must be a multiple of bar_width")

    @property
    def n_bars(self) -> int:
        return (self.close_time - self.open_time) // self.bar_width

    @property
    def open_ns(self) -> int:
        return self.open_time * NS_PER_SECOND

    @property
    def close_ns(self) -> int:
        return self.close_time * NS_PER_SECOND

    @property
    def width_ns(self) -> int:
        return self.bar_width * NS_PER_SECOND


def event_category(event_type: int, include_hidden: bool = True) -> Category | None:
    if event_type == EventType.NEW_LIMIT:
        return Category.LIMIT
    if event_type in (EventType.PARTIAL_CANCEL, EventType.DELETE):
        return Category.CANCEL
    if event_type == EventType.EXEC_VISIBLE or (include_hidden and event_type == EventType.EXEC_HIDDEN):
        return Category.TRADE
    return None


@dataclass(frozen=True)
class MinuteBar:
    date: date
    bar_index: int
    volumes: dict[Category, int]
    event_counts: dict[Category, int]
    close_mid: float | None
    halted: bool = False


@dataclass(frozen=True)
class ReturnPoint:
    date: date
    bar_index: int
    log_return: float
    week_slot: int


def _to_days(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


def weekday(dates: np.ndarray) -> np.ndarray:
    """Monday=0 ... Sunday=6 for a datetime64[D] array."""
    return (dates.astype(np.int64) + 3) % 7


@dataclass
class MinuteBars:
    """Columnar bars: one row per (date, bar_index)."""

    date: np.ndarray
    bar_index: np.ndarray
    volume: dict[Category, np.ndarray]
    count: dict[Category, np.ndarray]
    close_mid: np.ndarray
    halted: np.ndarray
    bars_per_day: int = 390

    def __len__(self) -> int:
        return len(self.bar_index)

    @classmethod
    def concat(cls, parts: Sequence["MinuteBars"]) -> "MinuteBars":
        if not parts:
            z = np.empty(0, dtype=np.int64)
            return cls(_to_days([]), z, {c: z for c in CATEGORIES}, {c: z for c in CATEGORIES},
                       np.empty(0), np.empty(0, dtype=bool))
        return cls(
            np.concatenate([p.date for p in parts]),
            np.concatenate([p.bar_index for p in parts]),
            {c: np.concatenate([p.volume[c] for p in parts]) for c in CATEGORIES},
            {c: np.concatenate([p.count[c] for p in parts]) for c in CATEGORIES},
            np.concatenate([p.close_mid for p in parts]),
            np.concatenate([p.halted for p in parts]),
            parts[0].bars_per_day,
        )

    def records(self) -> Iterator[MinuteBar]:
        for k in range(len(self)):
            mid = float(self.close_mid[k])
            yield MinuteBar(
                self.date[k].item(),
                int(self.bar_index[k]),
                {c: int(self.volume[c][k]) for c in CATEGORIES},
                {c: int(self.count[c][k]) for c in CATEGORIES},
                None if math.isnan(mid) else mid,
                bool(self.halted[k]),
            )


def _as_frames(events, snapshots) -> tuple[MessageFrame, BookFrame]:
    if not isinstance(events, MessageFrame):
        events = MessageFrame.from_events(list(events))
    if not isinstance(snapshots, BookFrame):
        snapshots = BookFrame.from_snapshots(list(snapshots))
    return events, snapshots


def build_minute_bars(
    events: MessageFrame | Sequence[OrderFlowEvent],
    snapshots: BookFrame | Sequence[BookSnapshot],
    day: date,
    session: SessionSpec = SessionSpec(),
    *,
    include_hidden: bool = True,
    exclude_after_halt: bool = True,
    drop_outside: bool = True,
) -> MinuteBars:
    """Aggregate one day of row-aligned messages and snapshots into bars.

    Exactly ``session.n_bars`` bars are returned, empty minutes included.
    Cross trades (6) and halts (7) never contribute volume. With
    ``exclude_after_halt`` every bar from the first in-session halt onward is
    flagged ``halted``. Events outside the session are dropped with a warning,
    or raise :class:`EventOutsideSession` if ``drop_outside`` is false.
    """
    msgs, book = _as_frames(events, snapshots)
    if len(msgs) != len(book):
        raise UnalignedInputs(f"{len(msgs)} events vs {len(book)} snapshots")
    n = session.n_bars
    t = msgs.time_ns
    inside = (t >= session.open_ns) & (t < session.close_ns)
    outside = ~inside & (msgs.event_type != EventType.HALT)
    n_out = int(outside.sum())
    if n_out:
        if not drop_outside:
            first = int(np.flatnonzero(outside)[0])
            raise EventOutsideSession(f"{n_out} events outside session on {day}", lineno=first + 1)
        log.warning("%s: dropped %d events outside the session", day, n_out)

    bucket = (t - session.open_ns) // session.width_ns
    volume: dict[Category, np.ndarray] = {}
    count: dict[Category, np.ndarray] = {}
    for cat in CATEGORIES:
        types = {
            Category.TRADE: [EventType.EXEC_VISIBLE] + ([EventType.EXEC_HIDDEN] if include_hidden else []),
            Category.LIMIT: [EventType.NEW_LIMIT],
            Category.CANCEL: [EventType.PARTIAL_CANCEL, EventType.DELETE],
        }[cat]
        sel = inside & np.isin(msgs.event_type, types)
        b = bucket[sel]
        count[cat] = np.bincount(b, minlength=n).astype(np.int64)
        # integer sums stay exact: float64 holds integers up to 2**53
        volume[cat] = np.rint(np.bincount(b, weights=msgs.size[sel], minlength=n)).astype(np.int64)

    ends = session.open_ns + session.width_ns * np.arange(1, n + 1, dtype=np.int64)
    mids = book.mid()
    valid = np.flatnonzero(~np.isnan(mids))
    pos = np.searchsorted(t[valid], ends, side="left") - 1
    close_mid = np.full(n, np.nan)
    have = pos >= 0
    close_mid[have] = mids[valid[pos[have]]]

    halted = np.zeros(n, dtype=bool)
    if exclude_after_halt:
        halts = t[(msgs.event_type == EventType.HALT) & (t < session.close_ns)]
        if len(halts):
            first_bar = max(0, int((halts.min() - session.open_ns) // session.width_ns))
            halted[first_bar:] = True

    return MinuteBars(
        np.full(n, np.datetime64(day, "D")),
        np.arange(n, dtype=np.int64),
        volume,
        count,
        close_mid,
        halted,
        n,
    )


@dataclass
class ReturnSeries:
    """Chained one-minute log returns, concatenated across days."""

    date: np.ndarray
    bar_index: np.ndarray
    value: np.ndarray
    bars_per_day: int = 390
    summary: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.value)

    @property
    def n_slots(self) -> int:
        return 5 * self.bars_per_day

    def week_slot(self) -> np.ndarray:
        wd = weekday(self.date)
        if (wd > 4).any():
            raise ValueError("return series contains weekend dates")
        return wd * self.bars_per_day + self.bar_index

    def scaled(self, factor: float) -> "ReturnSeries":
        return ReturnSeries(self.date, self.bar_index, self.value * factor, self.bars_per_day, dict(self.summary))

    @classmethod
    def from_array(cls, values, bars_per_day: int = 390, start: date = date(2021, 1, 4),
                   first_bar: int = 0) -> "ReturnSeries":
        """Lay a flat return array onto consecutive business days.

        Each day receives ``bars_per_day - first_bar`` returns at bar indices
        ``first_bar, first_bar + 1, ...``.
        """
        values = np.asarray(values, dtype=np.float64)
        per_day = bars_per_day - first_bar
        n_days = -(-len(values) // per_day)
        days = np.busday_offset(np.datetime64(start, "D"), np.arange(n_days), roll="forward")
        k = np.arange(len(values))
        return cls(days[k // per_day], first_bar + k % per_day, values, bars_per_day)

    def records(self) -> Iterator[ReturnPoint]:
        slots = self.week_slot()
        for k in range(len(self)):
            yield ReturnPoint(self.date[k].item(), int(self.bar_index[k]), float(self.value[k]), int(slots[k]))


def log_returns(bars: MinuteBars) -> ReturnSeries:
    """Within-day returns ``ln mid_i - ln mid_(i-1)``.

    The first bar of each day yields nothing; a missing or halted bar yields
    no return and breaks the chain for its successor. Skips are tallied in
    ``summary``.
    """
    mid = bars.close_mid
    usable = ~np.isnan(mid) & ~bars.halted & (mid > 0) if len(mid) else np.zeros(0, bool)
    lm = np.full(len(mid), np.nan)
    lm[usable] = np.log(mid[usable])
    same_day = np.zeros(len(mid), dtype=bool)
    same_day[1:] = (bars.date[1:] == bars.date[:-1]) & (bars.bar_index[1:] == bars.bar_index[:-1] + 1)
    ok = np.zeros(len(mid), dtype=bool)
    ok[1:] = same_day[1:] & usable[1:] & usable[:-1]
    value = np.empty(len(mid))
    value[1:] = lm[1:] - lm[:-1]
    idx = np.flatnonzero(ok)

    day_start = ~same_day
    summary = {
        "bars": len(mid),
        "returns": len(idx),
        "day_starts": int(day_start.sum()),
        "missing_mid": int(np.isnan(mid).sum()),
        "halted": int(bars.halted.sum()),
        "chain_breaks": int((~ok & ~day_start).sum()),
    }
    return ReturnSeries(bars.date[idx], bars.bar_index[idx], value[idx], bars.bars_per_day, summary)


# ---------------------------------------------------------------------------
# CSV

BAR_COLUMNS = [
    "date", "bar_index", "trade_vol", "limit_vol", "cancel_vol",
    "trade_count", "limit_count", "cancel_count", "close_mid", "halted",
]


def fmt_num(x: float) -> str:
    """12 significant digits; empty for NaN."""
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.12g}"


def write_bars_csv(bars: MinuteBars, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BAR_COLUMNS)
        cols = [
            bars.date.astype(str).tolist(), bars.bar_index.tolist(),
            *(bars.volume[c].tolist() for c in CATEGORIES),
            *(bars.count[c].tolist() for c in CATEGORIES),
            [fmt_num(x) for x in bars.close_mid.tolist()],
            bars.halted.astype(int).tolist(),
        ]
        w.writerows(zip(*cols))


def read_bars_csv(path: str | Path, bars_per_day: int | None = None) -> MinuteBars:
    import pandas as pd

    try:
        df = pd.read_csv(path, dtype={"date": str}, keep_default_na=False)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read bars: {exc}", source=str(path)) from exc
    missing = set(BAR_COLUMNS[:-1]) - set(df.columns)
    if missing:
        raise ParseError(f"missing columns {sorted(missing)}", source=str(path))
    mid = pd.to_numeric(df["close_mid"].replace("", np.nan)).to_numpy(np.float64)
    halted = df["halted"].to_numpy(bool) if "halted" in df else np.zeros(len(df), bool)
    bar_index = df["bar_index"].to_numpy(np.int64)
    if bars_per_day is None:
        bars_per_day = int(bar_index.max()) + 1 if len(bar_index) else 390
    return MinuteBars(
        _to_days(df["date"].tolist()),
        bar_index,
        {c: df[f"{c.value}_vol"].to_numpy(np.int64) for c in CATEGORIES},
        {c: df[f"{c.value}_count"].to_numpy(np.int64) for c in CATEGORIES},
        mid,
        halted,
        bars_per_day,
    )
