"""Nonparametric jump test on one-minute returns with periodicity filtering.

Each return is standardized by a trailing bipower estimate of local
volatility and, optionally, by a deterministic intraweek (or intraday)
volatility factor. A return is a jump when its standardized magnitude, after
the Gumbel normalization for the maximum of ``n`` such statistics, exceeds
the ``1 - alpha`` Gumbel quantile.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterator

import numpy as np

from .bars import ReturnSeries, fmt_num
from .errors import DomainError, InsufficientData, ParseError, WindowTooShort

# Weighted-standard-deviation constants: ShortH consistency factor, WSD
# consistency factor, and the 0.99 quantile of chi-square(1).
SHORTH_FACTOR = 0.7413
WSD_FACTOR = 1.081
WSD_CUTOFF = 6.635


class PeriodicityMode(str, enum.Enum):
    OFF = "off"
    INTRADAY = "intraday"
    INTRAWEEK = "intraweek"


class ReturnSign(enum.IntEnum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1


@dataclass(frozen=True)
class DetectorConfig:
    window: int = 390
    alpha: float = 0.01
    periodicity: PeriodicityMode = PeriodicityMode.INTRAWEEK
    min_slot_obs: int = 10

    def __post_init__(self):
        if self.window < 3:
            raise ValueError(f"window must be >= 3, got {self.window}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.min_slot_obs < 2:
            raise ValueError("min_slot_obs must be >= 2")


# ---------------------------------------------------------------------------
# local volatility


def bipower_local_vol(returns, i: int, window: int) -> float:
    """Trailing bipower volatility at index ``i``.

    ``sigma^2 = sum(|r_j| |r_(j-1)|, j = i-K+2 .. i-1) / (K-2)``; no pi/2
    factor, the Gumbel constants absorb it.
    """
    if window < 3:
        raise DomainError("window must be >= 3")
    if i < window:
        raise WindowTooShort(f"index {i} inside the first {window} returns")
    r = np.abs(np.asarray(returns, dtype=np.float64))
    lo = i - window + 2
    return math.sqrt(float(np.dot(r[lo:i], r[lo - 1:i - 1])) / (window - 2))


def local_bipower_vol(returns, window: int) -> np.ndarray:
    """``bipower_local_vol`` for every testable index ``window .. N-1``."""
    r = np.abs(np.asarray(returns, dtype=np.float64))
    if len(r) <= window:
        return np.empty(0)
    prod = r[1:] * r[:-1]  # prod[j-1] = |r_j||r_(j-1)|
    # direct windowed sums, no running-sum cancellation: an all-zero window
    # must give exactly zero
    sums = np.convolve(prod, np.ones(window - 2), mode="valid")
    # sums[m] covers prod[m .. m+K-3], i.e. j = m+1 .. m+K-2; index i uses m = i-K+1
    sums = sums[1 : len(r) - window + 1]
    np.maximum(sums, 0.0, out=sums)
    return np.sqrt(sums / (window - 2))


# ---------------------------------------------------------------------------
# critical values


def gumbel_threshold(n: int, alpha: float) -> tuple[float, float, float]:
    """Centering ``C_n``, scale ``S_n`` and Gumbel quantile ``beta*``."""
    if n < 2:
        raise DomainError(f"need at least 2 tested observations, got {n}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    c = math.sqrt(2 / math.pi)
    root = math.sqrt(2 * math.log(n))
    c_n = root / c - (math.log(math.pi) + math.log(math.log(n))) / (2 * c * root)
    s_n = 1 / (c * root)
    beta = -math.log(-math.log1p(-alpha))
    return c_n, s_n, beta


# ---------------------------------------------------------------------------
# periodicity


@dataclass
class PeriodicityProfile:
    factors: np.ndarray
    sample_counts: np.ndarray
    mode: PeriodicityMode = PeriodicityMode.INTRAWEEK
    bars_per_day: int = 390

    @property
    def n_slots(self) -> int:
        return len(self.factors)

    @classmethod
    def flat(cls, bars_per_day: int = 390, mode: PeriodicityMode = PeriodicityMode.OFF) -> "PeriodicityProfile":
        s = bars_per_day if mode is PeriodicityMode.INTRADAY else 5 * bars_per_day
        return cls(np.ones(s), np.zeros(s, dtype=np.int64), mode, bars_per_day)

    def slots(self, returns: ReturnSeries) -> np.ndarray:
        if self.mode is PeriodicityMode.INTRADAY:
            return returns.bar_index
        return returns.week_slot()

    def factor_for(self, returns: ReturnSeries) -> np.ndarray:
        if self.mode is PeriodicityMode.OFF:
            return np.ones(len(returns))
        return self.factors[self.slots(returns)]


def daily_standardize(returns: ReturnSeries) -> tuple[np.ndarray, np.ndarray]:
    """Divide each return by its day's realized bipower volatility.

    Returns ``(x, keep)``; days with fewer than two returns or zero bipower
    variation are dropped (``keep`` false).
    """
    v = returns.value
    x = np.full(len(v), np.nan)
    if not len(v):
        return x, np.zeros(0, bool)
    day_id = np.concatenate([[0], np.cumsum(returns.date[1:] != returns.date[:-1])])
    a = np.abs(v)
    prod = np.zeros(len(v))
    same = np.zeros(len(v), bool)
    same[1:] = day_id[1:] == day_id[:-1]
    prod[same] = (a[1:] * a[:-1])[same[1:]]
    bpv = np.bincount(day_id, weights=prod)
    m = np.bincount(day_id)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.sqrt(math.pi / 2 * bpv / (m - 1))
    ok_day = (m >= 2) & (scale > 0)
    keep = ok_day[day_id]
    x[keep] = v[keep] / scale[day_id[keep]]
    return x, keep


def shorth(sorted_x: np.ndarray) -> float:
    """Shortest-half scale of an ascending sample."""
    m = len(sorted_x)
    h = m // 2 + 1
    return SHORTH_FACTOR * float(np.min(sorted_x[h - 1:] - sorted_x[: m - h + 1]))


def weighted_sd(x: np.ndarray) -> float:
    """One-step weighted standard deviation with hard rejection beyond the 99% chi2(1) cutoff."""
    xs = np.sort(x)
    sh = shorth(xs)
    if sh <= 0:
        return 0.0
    w = (xs / sh) ** 2 <= WSD_CUTOFF
    if not w.any():
        return 0.0
    return math.sqrt(WSD_FACTOR * float(np.sum(xs[w] ** 2)) / int(w.sum()))


def _group_wsd(x: np.ndarray, slot: np.ndarray, n_slots: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(slot, kind="stable")
    xs, ss = x[order], slot[order]
    counts = np.bincount(ss, minlength=n_slots)
    wsd = np.zeros(n_slots)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    for s in np.flatnonzero(counts >= 2):
        wsd[s] = weighted_sd(xs[bounds[s]:bounds[s + 1]])
    return wsd, counts


def estimate_periodicity(
    returns: ReturnSeries,
    mode: PeriodicityMode = PeriodicityMode.INTRAWEEK,
    min_obs: int = 10,
) -> PeriodicityProfile:
    """Robust per-slot volatility factors normalized to unit mean square.

    Slots come from the minute of the week (intraweek) or of the day
    (intraday). An intraweek slot with fewer than ``min_obs`` observations
    takes the intraday estimate for its minute. Slots that never carry a
    return (e.g. the first bar of each day) are set to 1 after the observed
    slots are normalized, which keeps the overall mean square at 1.
    """
    bpd = returns.bars_per_day
    if mode is PeriodicityMode.OFF:
        return PeriodicityProfile.flat(bpd, mode)
    x, keep = daily_standardize(returns)
    x = x[keep]
    bar = returns.bar_index[keep]
    intra_wsd, intra_n = _group_wsd(x, bar, bpd)
    intra_ok = (intra_n >= min_obs) & (intra_wsd > 0)
    short = (intra_n > 0) & ~intra_ok
    if short.any():
        raise InsufficientData(
            f"{int(short.sum())} intraday slots below {min_obs} usable observations "
            f"(first: bar {int(np.flatnonzero(short)[0])})"
        )
    if not intra_ok.any():
        raise InsufficientData("no slot has usable observations")

    if mode is PeriodicityMode.INTRADAY:
        wsd, counts, observed = intra_wsd, intra_n, intra_ok
    else:
        slot = returns.week_slot()[keep]
        wsd, counts = _group_wsd(x, slot, 5 * bpd)
        ok = (counts >= min_obs) & (wsd > 0)
        fallback = ~ok
        wsd = np.where(fallback, np.tile(intra_wsd, 5), wsd)
        observed = ok | np.tile(intra_ok, 5)

    f = np.ones(len(wsd))
    f[observed] = wsd[observed] / math.sqrt(float(np.mean(wsd[observed] ** 2)))
    return PeriodicityProfile(f, counts.astype(np.int64), mode, bpd)


# ---------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class JumpTestResult:
    date: date
    bar_index: int
    raw_stat: float
    filtered_stat: float
    threshold: float
    is_jump: bool
    return_sign: ReturnSign
    undefined: bool = False


@dataclass
class JumpResults:
    """Columnar test output, one row per tested return."""

    date: np.ndarray
    bar_index: np.ndarray
    log_return: np.ndarray
    raw_stat: np.ndarray
    filtered_stat: np.ndarray
    is_jump: np.ndarray
    undefined: np.ndarray
    c_n: float
    s_n: float
    beta_star: float

    def __len__(self) -> int:
        return len(self.bar_index)

    @property
    def threshold(self) -> float:
        """Critical value on the scale of ``|filtered_stat|``."""
        return self.c_n + self.s_n * self.beta_star

    @property
    def sign(self) -> np.ndarray:
        return np.sign(self.log_return).astype(np.int64)

    @property
    def n_jumps(self) -> int:
        return int(self.is_jump.sum())

    def records(self) -> Iterator[JumpTestResult]:
        sign = self.sign
        for k in range(len(self)):
            yield JumpTestResult(
                self.date[k].item(), int(self.bar_index[k]), float(self.raw_stat[k]),
                float(self.filtered_stat[k]), self.threshold, bool(self.is_jump[k]),
                ReturnSign(int(sign[k])), bool(self.undefined[k]),
            )


def detect_jumps(
    returns: ReturnSeries,
    profile: PeriodicityProfile | None = None,
    config: DetectorConfig = DetectorConfig(),
) -> JumpResults:
    """Test every return after the first ``config.window`` ones.

    With periodicity on and no ``profile`` given, one is estimated from
    ``returns``. The critical value is global: ``n`` is the number of tested
    returns in the whole series. Where the local volatility is zero the
    statistic is undefined (NaN) and the minute is never a jump.
    """
    k = config.window
    n_tested = len(returns) - k
    c_n, s_n, beta = gumbel_threshold(n_tested, config.alpha)

    if config.periodicity is PeriodicityMode.OFF:
        f = np.ones(len(returns))
    else:
        if profile is None:
            profile = estimate_periodicity(returns, config.periodicity, config.min_slot_obs)
        elif profile.mode is not config.periodicity:
            raise ValueError(f"profile mode {profile.mode.value} != config {config.periodicity.value}")
        f = profile.factor_for(returns)

    r = returns.value[k:]
    sigma = local_bipower_vol(returns.value, k)
    undefined = sigma == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(undefined, np.nan, r / sigma)
        filtered = np.where(undefined, np.nan, r / (f[k:] * sigma))
        is_jump = (np.abs(filtered) - c_n) / s_n > beta
    is_jump &= ~undefined
    return JumpResults(
        returns.date[k:], returns.bar_index[k:], r, raw, filtered, is_jump, undefined,
        c_n, s_n, beta,
    )


# ---------------------------------------------------------------------------
# CSV

JUMP_COLUMNS = ["date", "bar_index", "raw_stat", "filtered_stat", "threshold", "is_jump", "return_sign"]


def write_jumps_csv(results: JumpResults, path: str | Path) -> None:
    thr = fmt_num(results.threshold)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(JUMP_COLUMNS)
        w.writerows(
            (d, b, fmt_num(raw), fmt_num(flt), thr, int(j), s)
            for d, b, raw, flt, j, s in zip(
                results.date.astype(str).tolist(), results.bar_index.tolist(),
                results.raw_stat.tolist(), results.filtered_stat.tolist(),
                results.is_jump.tolist(), results.sign.tolist(),
            )
        )


@dataclass
class JumpTable:
    """What the tail stage needs back from ``jumps.csv``."""

    date: np.ndarray
    bar_index: np.ndarray
    is_jump: np.ndarray
    sign: np.ndarray

    def __len__(self) -> int:
        return len(self.bar_index)

    @classmethod
    def from_results(cls, results: JumpResults) -> "JumpTable":
        return cls(results.date, results.bar_index, results.is_jump, results.sign)


def read_jumps_csv(path: str | Path) -> JumpTable:
    import pandas as pd

    try:
        df = pd.read_csv(path, dtype={"date": str})
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read jump results: {exc}", source=str(path)) from exc
    missing = set(JUMP_COLUMNS) - set(df.columns)
    if missing:
        raise ParseError(f"missing columns {sorted(missing)}", source=str(path))
    return JumpTable(
        np.asarray(df["date"].tolist(), dtype="datetime64[D]"),
        df["bar_index"].to_numpy(np.int64),
        df["is_jump"].to_numpy(np.int64).astype(bool),
        df["return_sign"].to_numpy(np.int64),
    )
