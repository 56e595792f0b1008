"""Reader and writer for LOBSTER-style message and orderbook files.

A trading day is a pair of headerless CSV files whose rows are aligned: row
``i`` of the orderbook file is the book state right after message ``i``.

Message rows are ``time,type,order_id,size,price,direction`` with time in
seconds after midnight (up to nanosecond precision) and prices in 1/10000
currency units. Orderbook rows hold ``ask_price,ask_size,bid_price,bid_size``
repeated once per level; only level 1 is kept here.

Two reading paths are offered. :func:`read_message_file` and
:func:`read_orderbook_file` stream typed records one line at a time.
:func:`load_message_frame` and :func:`load_book_frame` read a whole day into
numpy columns, which is what bar construction consumes; on any irregularity
they fall back to the streaming parser so errors carry the same types and
line numbers.
"""

from __future__ import annotations

import contextlib
import enum
import io
import logging
import re
from dataclasses import dataclass
from datetime import date
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence, Union

import numpy as np
import pandas as pd

from .errors import (
    CrossedBook,
    InvalidDirection,
    InvalidEventType,
    MalformedLine,
    NonMonotoneTime,
    NonPositivePrice,
    NonPositiveSize,
    ParseError,
    UnalignedInputs,
)

log = logging.getLogger(__name__)

NS_PER_SECOND = 1_000_000_000

Source = Union[str, Path, bytes, IO[bytes], IO[str]]


class EventType(enum.IntEnum):
    NEW_LIMIT = 1
    PARTIAL_CANCEL = 2
    DELETE = 3
    EXEC_VISIBLE = 4
    EXEC_HIDDEN = 5
    CROSS_TRADE = 6
    HALT = 7


class Side(enum.IntEnum):
    BUY = 1
    SELL = -1


class Strictness(enum.Enum):
    FAIL = "fail"
    SKIP_AND_WARN = "skip"


@dataclass(frozen=True, slots=True)
class OrderFlowEvent:
    time_ns: int
    event_type: EventType
    order_id: int
    size: int
    price: int
    side: Side

    @property
    def time(self) -> Decimal:
        """Seconds after midnight, exact."""
        return Decimal(self.time_ns).scaleb(-9)

    @property
    def seconds(self) -> float:
        return self.time_ns / NS_PER_SECOND


@dataclass(frozen=True, slots=True)
class BookSnapshot:
    time_ns: int | None
    best_ask_price: int
    best_ask_size: int
    best_bid_price: int
    best_bid_size: int

    @property
    def has_ask(self) -> bool:
        return self.best_ask_size > 0

    @property
    def has_bid(self) -> bool:
        return self.best_bid_size > 0

    @property
    def mid(self) -> float | None:
        """Mid-price in ticks, or None when either side is empty."""
        if not (self.has_ask and self.has_bid):
            return None
        return (self.best_ask_price + self.best_bid_price) / 2


# ---------------------------------------------------------------------------
# time handling

_TIME_RE = re.compile(r"^(\d+)(?:\.(\d*))?$")


def parse_time_ns(text: str) -> int:
    """Seconds-after-midnight text to integer nanoseconds.

    Up to 9 decimals are exact; extra digits are rounded half-even.
    """
    text = text.strip()
    m = _TIME_RE.match(text)
    if m and (m.group(2) is None or len(m.group(2)) <= 9):
        whole, frac = m.group(1), m.group(2) or ""
        return int(whole) * NS_PER_SECOND + int(frac.ljust(9, "0"))
    try:
        d = Decimal(text)
    except InvalidOperation:
        raise MalformedLine(f"non-numeric time {text!r}") from None
    if not d.is_finite() or d < 0:
        raise MalformedLine(f"invalid time {text!r}")
    return int(d.scaleb(9).quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def format_time_ns(ns: int) -> str:
    return f"{ns // NS_PER_SECOND}.{ns % NS_PER_SECOND:09d}"


# ---------------------------------------------------------------------------
# single-line parsing


def _int_field(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise MalformedLine(f"non-integer {name} {text.strip()!r}") from None


def parse_message_line(line: str) -> OrderFlowEvent:
    fields = line.strip().split(",")
    if len(fields) != 6:
        raise MalformedLine(f"expected 6 fields, got {len(fields)}")
    time_ns = parse_time_ns(fields[0])
    type_code = _int_field(fields[1], "event type")
    order_id = _int_field(fields[2], "order id")
    size = _int_field(fields[3], "size")
    price = _int_field(fields[4], "price")
    direction = _int_field(fields[5], "direction")

    if not 1 <= type_code <= 7:
        raise InvalidEventType(f"event type {type_code} outside 1..7")
    if direction not in (1, -1):
        raise InvalidDirection(f"direction {direction} is not +1/-1")
    if order_id < 0:
        raise MalformedLine(f"negative order id {order_id}")
    event_type = EventType(type_code)
    if event_type is not EventType.HALT:
        if size < 1:
            raise NonPositiveSize(f"size {size} < 1")
        if price <= 0:
            raise NonPositivePrice(f"price {price} <= 0")
    return OrderFlowEvent(time_ns, event_type, order_id, size, price, Side(direction))


def format_message_line(event: OrderFlowEvent) -> str:
    return (
        f"{format_time_ns(event.time_ns)},{int(event.event_type)},{event.order_id},"
        f"{event.size},{event.price},{int(event.side)}"
    )


def parse_orderbook_line(line: str, time_ns: int | None = None) -> BookSnapshot:
    fields = line.strip().split(",")
    if len(fields) < 4 or len(fields) % 4:
        raise MalformedLine(f"expected 4*L fields, got {len(fields)}")
    ask_p, ask_s, bid_p, bid_s = (_int_field(f, "book field") for f in fields[:4])
    if ask_s < 0 or bid_s < 0:
        raise MalformedLine("negative book size")
    if ask_s > 0 and bid_s > 0 and ask_p <= bid_p:
        raise CrossedBook(f"ask {ask_p} <= bid {bid_p}")
    return BookSnapshot(time_ns, ask_p, ask_s, bid_p, bid_s)


def format_orderbook_line(snap: BookSnapshot) -> str:
    return f"{snap.best_ask_price},{snap.best_ask_size},{snap.best_bid_price},{snap.best_bid_size}"


# ---------------------------------------------------------------------------
# streaming readers / writers


@contextlib.contextmanager
def _text_lines(source: Source) -> Iterator[Iterable[str]]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="ascii", newline="") as fh:
            yield fh
    elif isinstance(source, bytes):
        yield io.StringIO(source.decode("ascii"), newline="")
    elif isinstance(source, io.TextIOBase):
        yield source
    else:
        # binary stream; detach so the caller keeps ownership of the buffer
        wrapper = io.TextIOWrapper(source, encoding="ascii", newline="")  # type: ignore[arg-type]
        try:
            yield wrapper
        finally:
            wrapper.detach()


def _source_name(source: Source) -> str | None:
    if isinstance(source, (str, Path)):
        return str(source)
    return getattr(source, "name", None) if not isinstance(source, bytes) else None


def read_message_file(
    source: Source, strictness: Strictness = Strictness.FAIL
) -> Iterator[OrderFlowEvent]:
    """Stream events in file order, checking that time never decreases.

    Under ``SKIP_AND_WARN`` bad lines (including ones that go back in time)
    are logged and dropped.
    """
    name = _source_name(source)
    with _text_lines(source) as lines:
        last = -1
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                event = parse_message_line(line)
                if event.time_ns < last:
                    raise NonMonotoneTime(
                        f"time {format_time_ns(event.time_ns)} before {format_time_ns(last)}"
                    )
            except ParseError as exc:
                exc.located(lineno, name)
                if strictness is Strictness.FAIL:
                    raise
                log.warning("skipping %s", exc)
                continue
            last = event.time_ns
            yield event


def read_orderbook_file(
    source: Source,
    times: Iterable[int] | None = None,
    strictness: Strictness = Strictness.FAIL,
) -> Iterator[BookSnapshot]:
    """Stream level-1 snapshots; deeper levels are ignored.

    ``times`` (nanoseconds, usually the paired message times) are attached
    positionally; a length mismatch raises :class:`UnalignedInputs`.
    """
    name = _source_name(source)
    time_iter = iter(times) if times is not None else None
    with _text_lines(source) as lines:
        lineno = 0
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            t = None
            if time_iter is not None:
                t = next(time_iter, None)
                if t is None:
                    raise UnalignedInputs("orderbook has more rows than messages", lineno, name)
            try:
                snap = parse_orderbook_line(line, t)
            except ParseError as exc:
                exc.located(lineno, name)
                if strictness is Strictness.FAIL:
                    raise
                log.warning("skipping %s", exc)
                continue
            yield snap
        if time_iter is not None and next(time_iter, None) is not None:
            raise UnalignedInputs("messages have more rows than orderbook", lineno, name)


@contextlib.contextmanager
def _text_sink(sink: Union[str, Path, IO[bytes], IO[str]]) -> Iterator[IO[str]]:
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="ascii", newline="") as fh:
            yield fh
    elif isinstance(sink, io.TextIOBase):
        yield sink  # type: ignore[misc]
    else:
        wrapper = io.TextIOWrapper(sink, encoding="ascii", newline="")  # type: ignore[arg-type]
        try:
            yield wrapper
        finally:
            wrapper.flush()
            wrapper.detach()


def write_message_file(events: Iterable[OrderFlowEvent], sink) -> None:
    with _text_sink(sink) as out:
        for event in events:
            out.write(format_message_line(event))
            out.write("\n")


def write_orderbook_file(snapshots: Iterable[BookSnapshot], sink) -> None:
    with _text_sink(sink) as out:
        for snap in snapshots:
            out.write(format_orderbook_line(snap))
            out.write("\n")


# ---------------------------------------------------------------------------
# columnar loading


@dataclass
class MessageFrame:
    """One day of messages as parallel numpy columns."""

    time_ns: np.ndarray
    event_type: np.ndarray
    order_id: np.ndarray
    size: np.ndarray
    price: np.ndarray
    side: np.ndarray

    def __len__(self) -> int:
        return len(self.time_ns)

    @classmethod
    def empty(cls) -> "MessageFrame":
        return cls(*(np.empty(0, dtype=np.int64) for _ in range(6)))

    @classmethod
    def from_events(cls, events: Iterable[OrderFlowEvent]) -> "MessageFrame":
        rows = [(e.time_ns, int(e.event_type), e.order_id, e.size, e.price, int(e.side)) for e in events]
        if not rows:
            return cls.empty()
        cols = np.array(rows, dtype=np.int64).T
        return cls(*cols)

    def events(self) -> Iterator[OrderFlowEvent]:
        for t, ty, oid, s, p, d in zip(
            self.time_ns.tolist(), self.event_type.tolist(), self.order_id.tolist(),
            self.size.tolist(), self.price.tolist(), self.side.tolist(),
        ):
            yield OrderFlowEvent(t, EventType(ty), oid, s, p, Side(d))

    def to_csv(self) -> str:
        secs, frac = np.divmod(self.time_ns, NS_PER_SECOND)
        return "".join(
            f"{a}.{b:09d},{c},{d},{e},{f},{g}\n"
            for a, b, c, d, e, f, g in zip(
                secs.tolist(), frac.tolist(), self.event_type.tolist(), self.order_id.tolist(),
                self.size.tolist(), self.price.tolist(), self.side.tolist(),
            )
        )


@dataclass
class BookFrame:
    """Level-1 book columns, row-aligned with a :class:`MessageFrame`."""

    ask_price: np.ndarray
    ask_size: np.ndarray
    bid_price: np.ndarray
    bid_size: np.ndarray

    def __len__(self) -> int:
        return len(self.ask_price)

    @classmethod
    def empty(cls) -> "BookFrame":
        return cls(*(np.empty(0, dtype=np.int64) for _ in range(4)))

    @classmethod
    def from_snapshots(cls, snaps: Iterable[BookSnapshot]) -> "BookFrame":
        rows = [(s.best_ask_price, s.best_ask_size, s.best_bid_price, s.best_bid_size) for s in snaps]
        if not rows:
            return cls.empty()
        return cls(*np.array(rows, dtype=np.int64).T)

    def mid(self) -> np.ndarray:
        """Mid in ticks; NaN where a side is empty."""
        ok = (self.ask_size > 0) & (self.bid_size > 0)
        mid = (self.ask_price.astype(np.float64) + self.bid_price) / 2
        return np.where(ok, mid, np.nan)

    def to_csv(self) -> str:
        return "".join(
            f"{a},{b},{c},{d}\n"
            for a, b, c, d in zip(
                self.ask_price.tolist(), self.ask_size.tolist(),
                self.bid_price.tolist(), self.bid_size.tolist(),
            )
        )


def _as_buffer(source: Source):
    if isinstance(source, bytes):
        return io.BytesIO(source)
    return source


def _rewindable(source: Source) -> Source:
    # streams are read twice on fallback, so snapshot them once
    if isinstance(source, (str, Path, bytes)):
        return source
    data = source.read()
    return data.encode("ascii") if isinstance(data, str) else data


# float64 times are exact to the nanosecond only below 2**20 s with at most
# nine decimals; anything else goes through the Decimal parser
_FAST_TIME_LIMIT = 2.0**20
_LONG_FRACTION = re.compile(rb"\.\d{10}")

_MSG_DTYPES = {0: np.float64, 1: np.int64, 2: np.int64, 3: np.int64, 4: np.int64, 5: np.int64}


def load_message_frame(source: Source, strictness: Strictness = Strictness.FAIL) -> MessageFrame:
    """Read a whole message file into columns.

    The vectorized path recovers times exactly for inputs with at most 9
    decimals below ~12 days (float64 resolution near 86400 s is ~1.5e-11 s).
    Any row that fails validation sends the file through
    :func:`read_message_file`.
    """
    source = _rewindable(source)
    data = Path(source).read_bytes() if isinstance(source, (str, Path)) else source
    if _LONG_FRACTION.search(data):
        return MessageFrame.from_events(read_message_file(source, strictness))
    try:
        df = pd.read_csv(
            io.BytesIO(data), header=None, engine="c", dtype=_MSG_DTYPES,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError:
        return MessageFrame.empty()
    except (ValueError, pd.errors.ParserError):
        return MessageFrame.from_events(read_message_file(source, strictness))
    if df.shape[1] != 6:
        return MessageFrame.from_events(read_message_file(source, strictness))

    t = df[0].to_numpy()
    time_ns = np.rint(t * NS_PER_SECOND).astype(np.int64)
    ty, oid, size, price, side = (df[k].to_numpy(np.int64) for k in range(1, 6))
    regular = ty != EventType.HALT
    ok = (
        np.isfinite(t).all()
        and (t >= 0).all()
        and (t < _FAST_TIME_LIMIT).all()
        and ((ty >= 1) & (ty <= 7)).all()
        and (np.abs(side) == 1).all()
        and (oid >= 0).all()
        and (size[regular] >= 1).all()
        and (price[regular] > 0).all()
        and (np.diff(time_ns) >= 0).all()
    )
    if not ok:
        return MessageFrame.from_events(read_message_file(source, strictness))
    return MessageFrame(time_ns, ty, oid, size, price, side)


def load_book_frame(source: Source, strictness: Strictness = Strictness.FAIL) -> BookFrame:
    source = _rewindable(source)

    def slow() -> BookFrame:
        return BookFrame.from_snapshots(read_orderbook_file(source, strictness=strictness))

    try:
        df = pd.read_csv(_as_buffer(source), header=None, engine="c", dtype=np.int64)
    except pd.errors.EmptyDataError:
        return BookFrame.empty()
    except (ValueError, pd.errors.ParserError):
        return slow()
    if df.shape[1] < 4 or df.shape[1] % 4:
        return slow()
    ap, as_, bp, bs = (df[k].to_numpy(np.int64) for k in range(4))
    both = (as_ > 0) & (bs > 0)
    if (as_ < 0).any() or (bs < 0).any() or (ap[both] <= bp[both]).any():
        return slow()
    return BookFrame(ap, as_, bp, bs)


def load_day(
    message_source: Source, orderbook_source: Source, strictness: Strictness = Strictness.FAIL
) -> tuple[MessageFrame, BookFrame]:
    """Load an aligned message/orderbook pair. Row counts must match."""
    msgs = load_message_frame(message_source, strictness)
    book = load_book_frame(orderbook_source, strictness)
    if len(msgs) != len(book):
        raise UnalignedInputs(
            f"{len(msgs)} message rows vs {len(book)} orderbook rows",
            source=_source_name(orderbook_source),
        )
    return msgs, book


# ---------------------------------------------------------------------------
# file naming

_NAME_RE = re.compile(
    r"^(?P<ticker>[^_]+)_(?P<date>\d{4}-\d{2}-\d{2})_(?P<start>\d+)_(?P<end>\d+)_"
    r"(?P<kind>message|orderbook)_(?P<levels>\d+)\.csv$"
)


@dataclass(frozen=True)
class DayFiles:
    ticker: str
    date: date
    message: Path
    orderbook: Path


def lobster_filename(ticker: str, day: date, kind: str, levels: int = 1,
                     start_ms: int = 34_200_000, end_ms: int = 57_600_000) -> str:
    return f"{ticker}_{day.isoformat()}_{start_ms}_{end_ms}_{kind}_{levels}.csv"


def find_day_files(paths: Sequence[str | Path]) -> list[DayFiles]:
    """Pair message and orderbook files by ticker and date.

    ``paths`` may mix directories and files. Unpaired files are an error.
    """
    files: list[Path] = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    found: dict[tuple[str, str], dict[str, Path]] = {}
    for f in files:
        m = _NAME_RE.match(f.name)
        if not m:
            raise ParseError(f"not a LOBSTER file name: {f.name}")
        found.setdefault((m["ticker"], m["date"]), {})[m["kind"]] = f
    out = []
    for (ticker, day), kinds in sorted(found.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        if set(kinds) != {"message", "orderbook"}:
            raise UnalignedInputs(f"{ticker} {day}: missing {({'message', 'orderbook'} - set(kinds)).pop()} file")
        out.append(DayFiles(ticker, date.fromisoformat(day), kinds["message"], kinds["orderbook"]))
    return out


__all__ = [
    "BookFrame", "BookSnapshot", "DayFiles", "EventType", "MessageFrame", "OrderFlowEvent",
    "Side", "Strictness", "find_day_files", "format_message_line", "format_time_ns",
    "load_book_frame", "load_day", "load_message_frame", "lobster_filename",
    "parse_message_line", "parse_orderbook_line", "parse_time_ns", "read_message_file",
    "read_orderbook_file", "write_message_file", "write_orderbook_file",
]
