"""Synthetic order flow with a ground-truth ledger.

Draw order is fixed so a spec (seed included) reproduces files and ledger
bit for bit. Three independent streams are derived from ``spec.seed``:

* ``[seed, 0]`` returns: a ``(n_days, bars-1)`` block of standard normals,
  then per-day Poisson jump counts, then for each day in order the jump
  positions (without replacement) and signs;
* ``[seed, 1]`` volumes: trade uniforms ``(n_days, bars)``, then limit
  normals, then cancel normals;
* ``[seed, 2, day]`` layout of one day: events per (minute, category),
  their sizes, cancel types, arrival offsets, tie-breaks, sides, price
  depths, then ask and bid sizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .bars import CATEGORIES, Category, ReturnSeries, SessionSpec
from .errors import DomainError, LedgerIncomplete
from .lobster import BookFrame, EventType, MessageFrame, lobster_filename


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 0
    n_days: int = 250
    start_date: str = "2021-01-04"
    base_vol: float = 5e-4
    diurnal_profile: Optional[tuple[float, ...]] = None
    diurnal_open_factor: float = 1.0
    diurnal_open_minutes: int = 0
    jump_rate: float = 1.0
    jump_size_sigmas: float = 10.0
    volume_body_location: float = math.log(2000)
    volume_body_scale: float = 0.5
    nonjump_tail_exponent: float = 3.2
    jump_tail_exponent: float = 1.6
    tail_splice_quantile: float = 0.90
    limit_body_location: float = math.log(5000)
    limit_body_scale: float = 0.6
    cancel_body_location: float = math.log(4000)
    cancel_body_scale: float = 0.6
    max_events_per_category: int = 4
    start_mid: int = 1_000_000
    half_spread: int = 50
    ticker: str = "SYN"
    bars_per_day: int = 390

    def __post_init__(self):
        if self.nonjump_tail_exponent <= 0 or self.jump_tail_exponent <= 0:
            raise ValueError("tail exponents must be positive")
        if not 0 < self.tail_splice_quantile < 1:
            raise ValueError("tail_splice_quantile must lie in (0, 1)")
        if self.jump_rate < 0 or self.base_vol < 0 or self.n_days < 1:
            raise ValueError("jump_rate, base_vol must be >= 0 and n_days >= 1")
        if self.diurnal_profile is not None:
            if len(self.diurnal_profile) != self.bars_per_day:
                raise ValueError(f"diurnal_profile needs {self.bars_per_day} factors")
            if min(self.diurnal_profile) <= 0:
                raise ValueError("diurnal factors must be positive")
        if self.half_spread < 1 or self.start_mid <= self.half_spread:
            raise ValueError("need start_mid > half_spread >= 1")
        if self.max_events_per_category < 1:
            raise ValueError("max_events_per_category must be >= 1")

    def profile(self) -> np.ndarray:
        if self.diurnal_profile is not None:
            return np.asarray(self.diurnal_profile, dtype=np.float64)
        p = np.ones(self.bars_per_day)
        p[: self.diurnal_open_minutes] = self.diurnal_open_factor
        return p

    def dates(self) -> np.ndarray:
        start = np.datetime64(date.fromisoformat(self.start_date), "D")
        return np.busday_offset(start, np.arange(self.n_days), roll="forward")

    def session(self) -> SessionSpec:
        return SessionSpec(bar_width=(57_600 - 34_200) // self.bars_per_day)


@dataclass
class GroundTruthLedger:
    dates: np.ndarray
    returns: np.ndarray  # (days, bars); column 0 is NaN (no overnight return)
    log_mid: np.ndarray  # exact log mid per minute
    jump_mask: np.ndarray
    jump_sign: np.ndarray
    true_periodicity: np.ndarray
    volumes: dict[Category, np.ndarray] = field(default_factory=dict)

    @property
    def bars_per_day(self) -> int:
        return self.returns.shape[1]

    def day_index(self, day) -> int:
        d = np.datetime64(day, "D")
        hit = np.flatnonzero(self.dates == d)
        if not len(hit):
            raise LedgerIncomplete(f"no ledger entry for {day}")
        return int(hit[0])

    def true_returns(self) -> ReturnSeries:
        days, bars = np.nonzero(~np.isnan(self.returns))
        return ReturnSeries(self.dates[days], bars.astype(np.int64), self.returns[days, bars], self.bars_per_day)

    def jump_minutes(self) -> list[tuple[date, int, int, float]]:
        days, bars = np.nonzero(self.jump_mask)
        return [
            (self.dates[d].item(), int(b), int(self.jump_sign[d, b]), float(self.returns[d, b]))
            for d, b in zip(days, bars)
        ]

    def to_json(self) -> dict:
        out = {
            "dates": self.dates.astype(str).tolist(),
            "true_periodicity": self.true_periodicity.tolist(),
            "jump_minutes": [
                {"date": d.isoformat(), "bar_index": b, "sign": s, "size": r}
                for d, b, s, r in self.jump_minutes()
            ],
            "true_returns": {},
            "log_mid": {},
            "per_minute_volumes": {},
        }
        for k, d in enumerate(out["dates"]):
            out["true_returns"][d] = [None if math.isnan(x) else x for x in self.returns[k].tolist()]
            out["log_mid"][d] = self.log_mid[k].tolist()
            if self.volumes:
                out["per_minute_volumes"][d] = {c.value: self.volumes[c][k].tolist() for c in CATEGORIES}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "GroundTruthLedger":
        dates = np.asarray(data["dates"], dtype="datetime64[D]")
        keys = data["dates"]
        returns = np.array([[np.nan if x is None else x for x in data["true_returns"][d]] for d in keys])
        log_mid = np.array([data["log_mid"][d] for d in keys])
        mask = np.zeros(returns.shape, bool)
        sign = np.zeros(returns.shape, np.int8)
        index = {d: k for k, d in enumerate(keys)}
        for j in data["jump_minutes"]:
            mask[index[j["date"]], j["bar_index"]] = True
            sign[index[j["date"]], j["bar_index"]] = j["sign"]
        vols = {}
        if data.get("per_minute_volumes"):
            vols = {c: np.array([data["per_minute_volumes"][d][c.value] for d in keys], dtype=np.int64)
                    for c in CATEGORIES}
        return cls(dates, returns, log_mid, mask, sign, np.asarray(data["true_periodicity"]), vols)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def pareto_from_uniform(u, mu: float, x_min: float = 1.0):
    """Inverse CCDF of a Pareto law: ``x_min * u**(-1/mu)``."""
    return x_min * np.power(u, -1.0 / mu)


def pareto_sample(mu: float, x_min: float, n: int, seed=None) -> np.ndarray:
    """``n`` draws with ``P(X > x) = (x / x_min)**-mu`` for ``x >= x_min``."""
    if not mu > 0 or not x_min > 0:
        raise DomainError(f"need mu > 0 and x_min > 0, got mu={mu}, x_min={x_min}")
    u = 1.0 - _rng(seed).random(n)  # (0, 1]
    return pareto_from_uniform(u, mu, x_min)


def spliced_quantile(u, location: float, scale: float, tail_exponent, splice_q: float):
    """Lognormal body below ``splice_q``, continuous Pareto tail above it."""
    u = np.asarray(u, dtype=np.float64)
    x_s = math.exp(location + scale * float(ndtri(splice_q)))
    body = np.exp(location + scale * ndtri(np.minimum(u, splice_q)))
    with np.errstate(divide="ignore"):
        tail = x_s * np.power(np.maximum(1.0 - u, 1e-300) / (1.0 - splice_q), -1.0 / np.asarray(tail_exponent))
    return np.where(u < splice_q, body, tail)


def gen_return_series(spec: SyntheticSpec) -> tuple[ReturnSeries, GroundTruthLedger]:
    """Gaussian minute returns with diurnal scale and Poisson-injected jumps.

    Bar 0 of each day carries no return; jumps replace the return at their
    minute with ``sign * jump_size_sigmas * sigma``.
    """
    rng = np.random.default_rng([spec.seed, 0])
    bpd = spec.bars_per_day
    prof = spec.profile()
    sigma = spec.base_vol * prof[1:]
    z = rng.standard_normal((spec.n_days, bpd - 1))
    r = z * sigma
    n_jumps = rng.poisson(spec.jump_rate, spec.n_days)
    mask = np.zeros((spec.n_days, bpd), bool)
    sign = np.zeros((spec.n_days, bpd), np.int8)
    for d in range(spec.n_days):
        k = min(int(n_jumps[d]), bpd - 1)
        if not k:
            continue
        pos = rng.choice(bpd - 1, size=k, replace=False)
        sgn = rng.choice(np.array([-1, 1]), size=k)
        r[d, pos] = sgn * spec.jump_size_sigmas * sigma[pos]
        mask[d, pos + 1] = True
        sign[d, pos + 1] = sgn

    returns = np.full((spec.n_days, bpd), np.nan)
    returns[:, 1:] = r
    # each day opens at the previous close: no overnight move
    day_moves = r.sum(axis=1)
    opens = math.log(spec.start_mid) + np.concatenate([[0.0], np.cumsum(day_moves)[:-1]])
    log_mid = np.empty((spec.n_days, bpd))
    log_mid[:, 0] = opens
    log_mid[:, 1:] = opens[:, None] + np.cumsum(r, axis=1)

    ledger = GroundTruthLedger(spec.dates(), returns, log_mid, mask, sign, prof)
    return ledger.true_returns(), ledger


def gen_volume_series(spec: SyntheticSpec, ledger: GroundTruthLedger) -> dict[Category, np.ndarray]:
    """Per-minute volumes for every category, stored on the ledger.

    Trade volume is a spliced lognormal/Pareto draw whose tail exponent
    depends on whether the minute holds an injected jump.
    """
    rng = np.random.default_rng([spec.seed, 1])
    shape = ledger.returns.shape
    u = rng.random(shape)
    mu = np.where(ledger.jump_mask, spec.jump_tail_exponent, spec.nonjump_tail_exponent)
    trade = spliced_quantile(u, spec.volume_body_location, spec.volume_body_scale, mu,
                             spec.tail_splice_quantile)
    limit = np.exp(spec.limit_body_location + spec.limit_body_scale * rng.standard_normal(shape))
    cancel = np.exp(spec.cancel_body_location + spec.cancel_body_scale * rng.standard_normal(shape))
    vols = {
        Category.TRADE: trade,
        Category.LIMIT: limit,
        Category.CANCEL: cancel,
    }
    # cap keeps single-event sizes inside int64 for extreme Pareto draws
    ledger.volumes = {c: np.maximum(np.ceil(np.minimum(v, 1e15)), 1).astype(np.int64) for c, v in vols.items()}
    return ledger.volumes


def mid_ticks(log_mid: np.ndarray) -> np.ndarray:
    """Round-half-even onto the integer tick grid."""
    return np.rint(np.exp(log_mid)).astype(np.int64)


def split_sizes(totals: np.ndarray, parts: np.ndarray, max_parts: int,
                rng: np.random.Generator) -> np.ndarray:
    """Split each ``totals[g]`` into ``parts[g]`` positive integers.

    Returns a ``(groups, max_parts)`` array, zero past ``parts[g]``. The
    surplus over one share per part is spread by sequential binomial draws,
    which is a uniform multinomial split.
    """
    out = np.zeros((len(totals), max_parts), dtype=np.int64)
    rem = totals - parts
    for j in range(max_parts):
        active = j < parts
        last = j == parts - 1
        left = np.maximum(parts - j, 1)
        draw = rng.binomial(np.where(active & ~last, rem, 0), 1.0 / left)
        take = np.where(last, rem, draw)
        take = np.where(active, take, 0)
        out[:, j] = np.where(active, 1 + take, 0)
        rem = rem - take
    return out


def gen_lobster_day(spec: SyntheticSpec, ledger: GroundTruthLedger, day) -> tuple[str, str]:
    """Message and orderbook file contents for one ledger day.

    Every minute holds at least one execution, so each bar's closing mid is
    the ledger mid of that minute rounded to ticks. Per-minute sizes sum to
    the ledger volume in each category.
    """
    msgs, book = gen_lobster_frames(spec, ledger, day)
    return msgs.to_csv(), book.to_csv()


def gen_lobster_frames(spec: SyntheticSpec, ledger: GroundTruthLedger, day) -> tuple[MessageFrame, BookFrame]:
    d = ledger.day_index(day)
    if not ledger.volumes:
        raise LedgerIncomplete("ledger has no volumes; run gen_volume_series first")
    rng = np.random.default_rng([spec.seed, 2, d])
    session = spec.session()
    bpd = ledger.bars_per_day
    mids = mid_ticks(ledger.log_mid[d])
    hs = spec.half_spread
    cap = spec.max_events_per_category

    # groups are (minute, category) in minute-major order
    totals = np.stack([ledger.volumes[c][d] for c in CATEGORIES], axis=1).ravel()
    parts = np.minimum(totals, rng.integers(1, cap + 1, size=len(totals)))
    sizes = split_sizes(totals, parts, cap, rng)
    keep = np.arange(cap)[None, :] < parts[:, None]
    group = np.repeat(np.arange(len(totals)), parts)
    size = sizes[keep]
    minute = group // len(CATEGORIES)
    cat = group % len(CATEGORIES)
    cancel_type = rng.choice(np.array([EventType.PARTIAL_CANCEL, EventType.DELETE]), size=len(size))
    ty = np.select(
        [cat == CATEGORIES.index(Category.TRADE), cat == CATEGORIES.index(Category.LIMIT)],
        [int(EventType.EXEC_VISIBLE), int(EventType.NEW_LIMIT)],
        cancel_type,
    ).astype(np.int64)
    n = len(ty)
    offsets = rng.integers(0, session.width_ns, size=n)
    time_ns = session.open_ns + minute * session.width_ns + offsets
    order = np.lexsort((rng.random(n), time_ns))
    ty, size, minute, time_ns = ty[order], size[order], minute[order], time_ns[order]

    side = rng.choice(np.array([-1, 1]), size=n)
    mid = mids[minute]
    bid, ask = mid - hs, mid + hs
    depth = rng.integers(0, 10, size=n)
    is_exec = ty == EventType.EXEC_VISIBLE
    # executed sell limit orders trade at the ask, buy ones at the bid
    price = np.where(side < 0, ask + np.where(is_exec, 0, depth), bid - np.where(is_exec, 0, depth))
    order_id = 10_000_000 * d + 1 + np.arange(n, dtype=np.int64)

    msgs = MessageFrame(time_ns.astype(np.int64), ty, order_id, size, price.astype(np.int64), side.astype(np.int64))
    book = BookFrame(ask.astype(np.int64), rng.integers(100, 2000, size=n), bid.astype(np.int64),
                     rng.integers(100, 2000, size=n))
    return msgs, book


def generate(spec: SyntheticSpec) -> GroundTruthLedger:
    _, ledger = gen_return_series(spec)
    gen_volume_series(spec, ledger)
    return ledger


def write_dataset(spec: SyntheticSpec, out_dir: str | Path) -> GroundTruthLedger:
    """Write one message/orderbook pair per day plus ``ledger.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ledger = generate(spec)
    start_ms, end_ms = spec.session().open_time * 1000, spec.session().close_time * 1000
    for day in ledger.dates:
        msg, book = gen_lobster_day(spec, ledger, day)
        dd = day.item()
        (out / lobster_filename(spec.ticker, dd, "message", 1, start_ms, end_ms)).write_text(msg)
        (out / lobster_filename(spec.ticker, dd, "orderbook", 1, start_ms, end_ms)).write_text(book)
    payload = {"spec": spec_to_dict(spec), **ledger.to_json()}
    (out / "ledger.json").write_text(json.dumps(payload))
    return ledger


def spec_to_dict(spec: SyntheticSpec) -> dict:
    d = asdict(spec)
    if d["diurnal_profile"] is not None:
        d["diurnal_profile"] = list(d["diurnal_profile"])
    return d


def spec_keys() -> list[str]:
    return [f.name for f in fields(SyntheticSpec)]
