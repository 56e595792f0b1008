import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flashcrash.bars import (
    Category,
    MinuteBars,
    ReturnSeries,
    SessionSpec,
    build_minute_bars,
    event_category,
    log_returns,
    read_bars_csv,
    weekday,
    write_bars_csv,
)
from flashcrash.errors import EventOutsideSession, UnalignedInputs
from flashcrash.lobster import BookSnapshot, EventType, OrderFlowEvent, Side

DAY = date(2021, 3, 1)  # a Monday
OPEN = 34_200 * 10**9
MIN = 60 * 10**9


def ev(sec, ty, size=10, price=1_000_000, side=1, oid=0):
    return OrderFlowEvent(OPEN + int(sec * 10**9), EventType(ty), oid, size, price, Side(side))


def book(ask=1_000_100, bid=999_900):
    return BookSnapshot(None, ask, 5, bid, 5)


def bars_of(rows, **kw):
    events = [r[0] for r in rows]
    snaps = [r[1] for r in rows]
    return build_minute_bars(events, snaps, DAY, **kw)


def test_session_defaults():
    s = SessionSpec()
    assert s.n_bars == 390
    assert s.open_ns == OPEN and s.width_ns == MIN
    with pytest.raises(ValueError):
        SessionSpec(100, 50)
    with pytest.raises(ValueError):
        SessionSpec(0, 100, 30)


def test_category_mapping():
    assert event_category(1) is Category.LIMIT
    assert event_category(2) is Category.CANCEL and event_category(3) is Category.CANCEL
    assert event_category(4) is Category.TRADE and event_category(5) is Category.TRADE
    assert event_category(5, include_hidden=False) is None
    assert event_category(6) is None and event_category(7) is None


def test_visible_and_hidden_trades_in_one_minute():
    b = bars_of([(ev(1, 4, 100), book()), (ev(30, 5, 50), book())])
    assert b.volume[Category.TRADE][0] == 150 and b.count[Category.TRADE][0] == 2
    b = bars_of([(ev(1, 4, 100), book()), (ev(30, 5, 50), book())], include_hidden=False)
    assert b.volume[Category.TRADE][0] == 100


def test_empty_minute_is_zero_and_missing_mid():
    b = bars_of([(ev(1, 1), book())])
    assert len(b) == 390
    rec = list(b.records())[1]
    assert rec.volumes == {c: 0 for c in Category}
    # mid carries forward: the last snapshot before the bar end still exists
    assert rec.close_mid == 1_000_000.0
    b = bars_of([(ev(61, 1), book())])
    assert math.isnan(b.close_mid[0])
    assert next(b.records()).close_mid is None


def test_bar_boundaries_are_half_open():
    b = bars_of([(ev(59.999999999, 4, 1), book()), (ev(60, 4, 2), book(1_000_200, 1_000_000))])
    assert b.volume[Category.TRADE][:2].tolist() == [1, 2]
    # the snapshot stamped exactly at 60 s belongs to bar 1, not bar 0
    assert b.close_mid[0] == 1_000_000.0 and b.close_mid[1] == 1_000_100.0


def test_cross_and_halt_excluded_halt_flags_rest_of_day():
    rows = [
        (ev(5, 4, 7), book()),
        (ev(6, 6, 1000), book()),
        (OrderFlowEvent(OPEN + 125 * 10**9, EventType.HALT, 0, 0, -1, Side.SELL), book()),
        (ev(200, 4, 3), book()),
    ]
    b = bars_of(rows)
    assert b.volume[Category.TRADE][0] == 7
    assert b.halted.tolist() == [False, False] + [True] * 388
    # volumes are still tallied; consumers drop halted bars
    assert b.volume[Category.TRADE][3] == 3
    b = bars_of(rows, exclude_after_halt=False)
    assert not b.halted.any()


def test_one_sided_book_gives_no_mid():
    b = bars_of([(ev(1, 1), BookSnapshot(None, 9_999_999_999, 0, 999_900, 5))])
    assert math.isnan(b.close_mid[0])


def test_outside_session():
    rows = [(ev(-1, 4, 9), book()), (ev(1, 4, 1), book())]
    b = bars_of(rows)
    assert b.volume[Category.TRADE].sum() == 1
    with pytest.raises(EventOutsideSession):
        bars_of(rows, drop_outside=False)
    with pytest.raises(UnalignedInputs):
        build_minute_bars([rows[0][0]], [], DAY)


def test_custom_bar_width():
    s = SessionSpec(bar_width=300)
    b = build_minute_bars([ev(299, 4, 1), ev(300, 4, 2)], [book(), book()], DAY, s)
    assert len(b) == 78 and b.volume[Category.TRADE][:2].tolist() == [1, 2]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 23_399_999), st.integers(1, 6), st.integers(1, 10**6)), max_size=200))
def test_volume_conservation(rows):
    rows.sort()
    events = [OrderFlowEvent(OPEN + t * 10**6, EventType(ty), 0, sz, 100, Side.BUY) for t, ty, sz in rows]
    b = build_minute_bars(events, [book()] * len(events), DAY)
    for cat, types in ((Category.TRADE, (4, 5)), (Category.LIMIT, (1,)), (Category.CANCEL, (2, 3))):
        assert b.volume[cat].sum() == sum(sz for _, ty, sz in rows if ty in types)
        assert b.count[cat].sum() == sum(1 for _, ty, _ in rows if ty in types)


def make_bars(mids, days=(DAY,), halted=None):
    n = len(mids) // len(days)
    z = np.zeros(len(mids), dtype=np.int64)
    return MinuteBars(
        np.repeat(np.array(days, dtype="datetime64[D]"), n),
        np.tile(np.arange(n), len(days)),
        {c: z for c in Category}, {c: z for c in Category},
        np.asarray(mids, dtype=float),
        np.zeros(len(mids), bool) if halted is None else np.asarray(halted),
        n,
    )


def test_log_returns_within_day_only():
    mids = [100.0, 101.0, 99.0, 200.0, 202.0, 202.0]
    r = log_returns(make_bars(mids, days=(date(2021, 3, 1), date(2021, 3, 2))))
    expect = [math.log(101 / 100), math.log(99 / 101), math.log(202 / 200), 0.0]
    assert np.allclose(r.value, expect, rtol=0, atol=1e-15)
    assert r.bar_index.tolist() == [1, 2, 1, 2]
    assert r.summary["day_starts"] == 2


def test_missing_mid_breaks_chain():
    r = log_returns(make_bars([100.0, np.nan, 101.0, 102.0]))
    assert r.bar_index.tolist() == [3]
    assert r.summary["missing_mid"] == 1 and r.summary["chain_breaks"] == 2


def test_halted_bars_yield_no_returns():
    r = log_returns(make_bars([100.0, 101.0, 102.0, 103.0], halted=[False, False, True, True]))
    assert r.bar_index.tolist() == [1]


def test_week_slot():
    r = ReturnSeries.from_array(np.zeros(390 * 6), bars_per_day=390)
    slots = r.week_slot()
    assert slots[0] == 0 and slots[389] == 389 and slots[390] == 390
    # the sixth business day is the next Monday
    assert slots[5 * 390] == 0 and weekday(r.date[5 * 390 : 5 * 390 + 1])[0] == 0
    sat = ReturnSeries(np.array(["2021-03-06"], dtype="datetime64[D]"), np.array([0]), np.zeros(1))
    with pytest.raises(ValueError):
        sat.week_slot()
    assert next(ReturnSeries.from_array([0.1], first_bar=1).records()).week_slot == 1


def test_weekday_known_dates():
    d = np.array(["1970-01-01", "2021-03-01", "2021-03-07"], dtype="datetime64[D]")
    assert weekday(d).tolist() == [3, 0, 6]


def test_bars_csv_roundtrip(tmp_path, small_spec, small_ledger):
    from flashcrash.lobster import load_day
    from flashcrash.synth import gen_lobster_frames

    parts = []
    for d in small_ledger.dates[:2]:
        m, bk = gen_lobster_frames(small_spec, small_ledger, d)
        m, bk = load_day(m.to_csv().encode(), bk.to_csv().encode())
        parts.append(build_minute_bars(m, bk, d.item()))
    bars = MinuteBars.concat(parts)
    bars.close_mid[5] = np.nan
    write_bars_csv(bars, tmp_path / "bars.csv")
    header = (tmp_path / "bars.csv").read_text().splitlines()[0]
    assert header == "date,bar_index,trade_vol,limit_vol,cancel_vol,trade_count,limit_count,cancel_count,close_mid,halted"
    back = read_bars_csv(tmp_path / "bars.csv")
    assert back.bars_per_day == 390
    assert np.array_equal(back.date, bars.date) and np.array_equal(back.bar_index, bars.bar_index)
    for c in Category:
        assert np.array_equal(back.volume[c], bars.volume[c])
        assert np.array_equal(back.count[c], bars.count[c])
    assert np.array_equal(back.close_mid, bars.close_mid, equal_nan=True)
    r1, r2 = log_returns(bars), log_returns(back)
    assert np.array_equal(r1.value, r2.value)


def test_single_trade_in_minute_zero():
    b = bars_of([(ev(0, 4, 100), book())])
    assert [int(b.volume[c][0]) for c in Category] == [100, 0, 0]
    assert all(int(b.volume[c][1:].sum()) == 0 for c in Category)


def test_constant_mid_gives_zero_returns():
    r = log_returns(make_bars([10_000.0] * 390))
    assert len(r) == 389 and (r.value == 0).all()


def test_closed_form_return():
    r = log_returns(make_bars([10_000.0, 10_100.0]))
    assert r.value[0] == pytest.approx(math.log(1.01), rel=1e-15)


def test_synthetic_returns_match_generator_mids(small_spec, small_ledger):
    from flashcrash.lobster import load_day
    from flashcrash.synth import gen_lobster_frames, mid_ticks

    d = small_ledger.dates[1]
    m, bk = gen_lobster_frames(small_spec, small_ledger, d)
    m, bk = load_day(m.to_csv().encode(), bk.to_csv().encode())
    r = log_returns(build_minute_bars(m, bk, d.item()))
    emitted = np.diff(np.log(mid_ticks(small_ledger.log_mid[1]).astype(float)))
    assert np.max(np.abs(r.value - emitted)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 6), st.integers(1, 1000)), min_size=1, max_size=30), st.randoms())
def test_order_within_minute_irrelevant(rows, rnd):
    def bars_for(rs):
        events = [OrderFlowEvent(OPEN + 5 * 10**9, EventType(ty), 0, sz, 100, Side.BUY) for ty, sz in rs]
        return build_minute_bars(events, [book()] * len(rs), DAY)

    shuffled = rows[:]
    rnd.shuffle(shuffled)
    a, b = bars_for(rows), bars_for(shuffled)
    for c in Category:
        assert np.array_equal(a.volume[c], b.volume[c]) and np.array_equal(a.count[c], b.count[c])


def test_event_at_close_is_outside():
    b = bars_of([(ev(23_400, 4, 5), book())])
    assert b.volume[Category.TRADE].sum() == 0
