"""Empirical CCDFs and log-log least-squares power-law tail fits."""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bars import Category, MinuteBars, fmt_num
from .errors import DegenerateTail, EmptyInput, InsufficientTail, JoinMismatch
from .jumps import JumpResults, JumpTable

log = logging.getLogger(__name__)

MIN_TAIL_POINTS = 10


class Boundedness(str, enum.Enum):
    UNBOUNDED_VARIANCE = "UnboundedVariance"
    BOUNDED_VARIANCE = "BoundedVariance"


@dataclass(frozen=True)
class TailFit:
    exponent: float
    intercept: float
    stderr_exponent: float
    r_squared: float
    q_lo: float
    q_hi: float
    n_points: int
    classification: Boundedness

    def summary(self, regime: str) -> dict:
        return {
            "regime": regime,
            "exponent": self.exponent,
            "intercept": self.intercept,
            "stderr": self.stderr_exponent,
            "r2": self.r_squared,
            "q_lo": self.q_lo,
            "q_hi": self.q_hi,
            "n_points": self.n_points,
            "classification": self.classification.value,
        }


def classify_boundedness(fit_or_exponent: TailFit | float) -> Boundedness:
    """CCDF convention: variance is finite iff the exponent exceeds 2.

    The boundary itself counts as unbounded.
    """
    mu = fit_or_exponent.exponent if isinstance(fit_or_exponent, TailFit) else float(fit_or_exponent)
    return Boundedness.UNBOUNDED_VARIANCE if mu <= 2 else Boundedness.BOUNDED_VARIANCE


def _positive(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if not len(x):
        raise EmptyInput("no samples")
    if np.isnan(x).any() or (x < 0).any():
        raise ValueError("samples must be non-negative numbers")
    n_zero = int((x == 0).sum())
    if n_zero:
        log.info("dropping %d zero samples", n_zero)
        x = x[x > 0]
        if not len(x):
            raise EmptyInput("all samples are zero")
    return x


def eccdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Distinct sample values ``x`` (ascending) and ``p(x) = #{X > x} / N``.

    Zeros are dropped before counting. The maximum, where ``p = 0``, is not
    returned.
    """
    x = _positive(samples)
    values, counts = np.unique(x, return_counts=True)
    above = len(x) - np.cumsum(counts)
    return values[:-1], above[:-1] / len(x)


def fit_loglog(x, p) -> tuple[float, float, float, float]:
    """OLS of ``ln p`` on ``ln x``: ``(slope, intercept, stderr_slope, r2)``."""
    lx = np.log(np.asarray(x, dtype=np.float64))
    lp = np.log(np.asarray(p, dtype=np.float64))
    n = len(lx)
    mx, mp = lx.mean(), lp.mean()
    dx, dp = lx - mx, lp - mp
    sxx = float(dx @ dx)
    if sxx == 0:
        raise DegenerateTail("zero variance of log x in the tail window")
    slope = float(dx @ dp) / sxx
    intercept = mp - slope * mx
    resid = dp - slope * dx
    ssr = float(resid @ resid)
    sst = float(dp @ dp)
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    stderr = math.sqrt(ssr / (n - 2) / sxx) if n > 2 else math.nan
    return slope, float(intercept), stderr, min(max(r2, 0.0), 1.0)


def tail_window(samples, q_lo: float = 0.90, q_hi: float = 0.999) -> tuple[np.ndarray, np.ndarray]:
    """ECCDF points whose ``x`` lies between the ``q_lo`` and ``q_hi`` sample quantiles."""
    if not 0 <= q_lo < q_hi <= 1:
        raise ValueError(f"need 0 <= q_lo < q_hi <= 1, got ({q_lo}, {q_hi})")
    x = _positive(samples)
    lo, hi = np.quantile(x, [q_lo, q_hi])
    xs, ps = eccdf(x)
    sel = (xs >= lo) & (xs <= hi)
    return xs[sel], ps[sel]


def fit_tail(samples, q_lo: float = 0.90, q_hi: float = 0.999) -> TailFit:
    """Power-law fit of the CCDF tail between two sample quantiles.

    The exponent is the negated log-log slope over distinct-value ECCDF
    points in the window.
    """
    xs, ps = tail_window(samples, q_lo, q_hi)
    if len(xs) < MIN_TAIL_POINTS:
        raise InsufficientTail(f"{len(xs)} ECCDF points in [{q_lo}, {q_hi}], need {MIN_TAIL_POINTS}")
    slope, intercept, stderr, r2 = fit_loglog(xs, ps)
    if slope >= 0:
        raise DegenerateTail(f"non-decaying tail (slope {slope})")
    mu = -slope
    return TailFit(mu, intercept, stderr, r2, q_lo, q_hi, len(xs), classify_boundedness(mu))


# ---------------------------------------------------------------------------
# regime split


@dataclass
class RegimeSplit:
    jump_samples: np.ndarray
    nonjump_samples: np.ndarray
    jump_positive: np.ndarray
    jump_negative: np.ndarray

    @property
    def merged(self) -> np.ndarray:
        return np.concatenate([self.jump_samples, self.nonjump_samples])

    def regimes(self) -> dict[str, np.ndarray]:
        return {
            "jump": self.jump_samples,
            "nonjump": self.nonjump_samples,
            "jump_positive": self.jump_positive,
            "jump_negative": self.jump_negative,
            "jump_plus_nonjump_merged": self.merged,
        }


def _keys(dates: np.ndarray, bar_index: np.ndarray, bars_per_day: int) -> np.ndarray:
    return dates.astype(np.int64) * (bars_per_day + 1) + bar_index


def split_by_jump(
    bars: MinuteBars,
    results: JumpResults | JumpTable,
    category: Category = Category.TRADE,
) -> RegimeSplit:
    """Partition tested minutes' volumes into jump / non-jump (and jump by sign)."""
    if isinstance(results, JumpResults):
        results = JumpTable.from_results(results)
    width = max(bars.bars_per_day, int(bars.bar_index.max(initial=0)) + 1,
                int(results.bar_index.max(initial=0)) + 1)
    bar_keys = _keys(bars.date, bars.bar_index, width)
    res_keys = _keys(results.date, results.bar_index, width)
    order = np.argsort(bar_keys, kind="stable")
    pos = np.searchsorted(bar_keys[order], res_keys)
    pos = np.minimum(pos, len(order) - 1) if len(order) else pos
    if len(res_keys) and (not len(order) or (bar_keys[order][pos] != res_keys).any()):
        raise JoinMismatch("jump results reference minutes absent from the bars")
    vol = bars.volume[category][order][pos] if len(res_keys) else np.empty(0, dtype=np.int64)
    jump = results.is_jump
    return RegimeSplit(
        vol[jump],
        vol[~jump],
        vol[jump & (results.sign > 0)],
        vol[jump & (results.sign < 0)],
    )


# ---------------------------------------------------------------------------
# export


def write_ccdf_csv(samples, path: str | Path) -> int:
    """Write ``x,p`` rows; returns the number of rows (0 for an empty regime)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "p"])
        try:
            xs, ps = eccdf(samples)
        except EmptyInput:
            return 0
        w.writerows((fmt_num(a), fmt_num(b)) for a, b in zip(xs.tolist(), ps.tolist()))
        return len(xs)

