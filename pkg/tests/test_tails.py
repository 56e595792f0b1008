import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from flashcrash.bars import Category, MinuteBars
from flashcrash.errors import DegenerateTail, EmptyInput, InsufficientTail, JoinMismatch
from flashcrash.jumps import JumpTable
from flashcrash.synth import pareto_sample
from flashcrash.tails import (
    Boundedness,
    classify_boundedness,
    eccdf,
    fit_loglog,
    fit_tail,
    split_by_jump,
    tail_window,
    write_ccdf_csv,
)


def exact_grid(mu, n):
    """Samples whose ECCDF is exactly p = x**-mu at every non-maximal point."""
    j = np.arange(n - 1)
    x = ((n - 1 - j) / n) ** (-1.0 / mu)
    return np.append(x, x[-1] * 2)


def test_eccdf_small_example():
    x, p = eccdf([3, 1, 2, 2, 5])
    assert x.tolist() == [1, 2, 3]
    assert p.tolist() == [4 / 5, 2 / 5, 1 / 5]


def test_eccdf_drops_zeros_and_validates():
    x, p = eccdf([0, 0, 1, 2])
    assert x.tolist() == [1] and p.tolist() == [0.5]
    with pytest.raises(EmptyInput):
        eccdf([])
    with pytest.raises(EmptyInput):
        eccdf([0, 0])
    with pytest.raises(ValueError):
        eccdf([1, -1])


@pytest.mark.parametrize("mu", [0.5, 1.6, 2.0, 3.2])
def test_exact_grid_recovers_exponent(mu):
    fit = fit_tail(exact_grid(mu, 20_000))
    assert fit.exponent == pytest.approx(mu, abs=1e-9)
    assert fit.intercept == pytest.approx(0.0, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.classification is classify_boundedness(mu)


def test_fit_loglog_matches_scipy(rng):
    x = np.exp(rng.uniform(0, 5, 300))
    p = np.exp(-1.3 * np.log(x) + rng.normal(0, 0.1, 300))
    slope, intercept, se, r2 = fit_loglog(x, p)
    ref = stats.linregress(np.log(x), np.log(p))
    assert slope == pytest.approx(ref.slope, rel=1e-12)
    assert intercept == pytest.approx(ref.intercept, rel=1e-12)
    assert se == pytest.approx(ref.stderr, rel=1e-10)
    assert r2 == pytest.approx(ref.rvalue**2, rel=1e-12)


def test_window_uses_numpy_quantiles(rng):
    s = rng.pareto(2.0, 5000) + 1
    xs, _ = tail_window(s, 0.5, 0.9)
    lo, hi = np.quantile(s, [0.5, 0.9])
    assert xs.min() >= lo and xs.max() <= hi
    assert len(xs) == int(((np.unique(s) >= lo) & (np.unique(s) <= hi)).sum())
    with pytest.raises(ValueError):
        tail_window(s, 0.9, 0.5)


def test_insufficient_tail():
    with pytest.raises(InsufficientTail):
        fit_tail(np.arange(1, 50))
    with pytest.raises(EmptyInput):
        fit_tail([])


def test_degenerate_tail():
    with pytest.raises(DegenerateTail):
        fit_loglog(np.ones(20), np.linspace(0.1, 0.5, 20))


def test_classification_boundary():
    assert classify_boundedness(2.0) is Boundedness.UNBOUNDED_VARIANCE
    assert classify_boundedness(2.0 + 1e-12) is Boundedness.BOUNDED_VARIANCE
    assert classify_boundedness(1.5).value == "UnboundedVariance"


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 5.0), st.floats(0.05, 0.5), st.floats(0.6, 0.99))
def test_sub_window_invariance(mu, q_lo, q_hi):
    # on exact power-law data any window gives the same exponent
    s = exact_grid(mu, 5000)
    try:
        fit = fit_tail(s, q_lo, q_hi)
    except InsufficientTail:
        return
    assert fit.exponent == pytest.approx(mu, abs=1e-9)


def test_scale_invariance(rng):
    s = pareto_sample(1.6, 1.0, 50_000, seed=3)
    a, b = fit_tail(s), fit_tail(s * 37.5)
    assert a.exponent == pytest.approx(b.exponent, rel=1e-9)


@pytest.mark.parametrize("mu", [1.2, 2.5])
def test_pareto_sample_fit(mu):
    fit = fit_tail(pareto_sample(mu, 1.0, 200_000, seed=11))
    assert abs(fit.exponent - mu) < 0.1


def bars_with(volumes, dates=("2021-03-01",)):
    n = len(volumes) // len(dates)
    v = np.asarray(volumes, dtype=np.int64)
    z = np.zeros_like(v)
    return MinuteBars(
        np.repeat(np.array(dates, dtype="datetime64[D]"), n), np.tile(np.arange(n), len(dates)),
        {Category.TRADE: v, Category.LIMIT: 10 * v, Category.CANCEL: z},
        {c: z for c in Category}, np.ones(len(v)), np.zeros(len(v), bool), n,
    )


def test_split_by_jump():
    bars = bars_with([5, 6, 7, 8, 9, 10])
    tab = JumpTable(
        np.array(["2021-03-01"] * 3, dtype="datetime64[D]"), np.array([4, 2, 3]),
        np.array([True, True, False]), np.array([-1, 1, 1]),
    )
    split = split_by_jump(bars, tab)
    assert split.jump_samples.tolist() == [9, 7]
    assert split.nonjump_samples.tolist() == [8]
    assert split.jump_positive.tolist() == [7] and split.jump_negative.tolist() == [9]
    assert sorted(split.merged.tolist()) == [7, 8, 9]
    assert split_by_jump(bars, tab, Category.LIMIT).jump_samples.tolist() == [90, 70]
    bad = JumpTable(tab.date, np.array([4, 2, 30]), tab.is_jump, tab.sign)
    with pytest.raises(JoinMismatch):
        split_by_jump(bars, bad)


def test_ccdf_csv(tmp_path):
    assert write_ccdf_csv([1, 2, 2, 4], tmp_path / "c.csv") == 2
    assert (tmp_path / "c.csv").read_text() == "x,p\n1,0.75\n2,0.25\n"
    assert write_ccdf_csv([], tmp_path / "e.csv") == 0
    assert (tmp_path / "e.csv").read_text() == "x,p\n"


def test_summary_keys():
    fit = fit_tail(exact_grid(3.2, 2000))
    d = fit.summary("nonjump")
    assert d["classification"] == "BoundedVariance" and d["regime"] == "nonjump"
    assert set(d) >= {"exponent", "intercept", "stderr", "r2", "q_lo", "q_hi", "n_points"}
    assert math.isfinite(d["stderr"])


def brute_eccdf(s):
    s = np.asarray(s, dtype=float)
    xs = np.unique(s)[:-1]
    p = np.array([np.count_nonzero(s > x) for x in xs]) / len(s)
    return xs, p


def test_eccdf_spec_examples():
    x, p = eccdf([1, 2, 3, 4])
    assert list(zip(x.tolist(), p.tolist())) == [(1, 0.75), (2, 0.5), (3, 0.25)]
    x, p = eccdf([7, 7, 7])
    assert len(x) == 0 and len(p) == 0


def test_eccdf_counting_oracle_pareto():
    s = np.ceil(pareto_sample(1.6, 1.0, 10**5, seed=5) * 100)
    x, p = eccdf(s)
    xs, ps = brute_eccdf(s)
    assert np.array_equal(x, xs) and np.array_equal(p, ps)
    assert (np.diff(p) < 0).all()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=300))
def test_eccdf_counting_oracle_property(s):
    x, p = eccdf(s)
    xs, ps = brute_eccdf(s)
    assert np.array_equal(x, xs) and np.array_equal(p, ps)


def test_classification_reported_exponents():
    assert classify_boundedness(1.6) is Boundedness.UNBOUNDED_VARIANCE
    assert classify_boundedness(3.21) is Boundedness.BOUNDED_VARIANCE


def test_scale_equivariance_all_fields():
    s = pareto_sample(2.5, 1.0, 50_000, seed=8)
    a, b = fit_tail(s), fit_tail(s * 1000.0)
    assert b.exponent == pytest.approx(a.exponent, rel=1e-9)
    assert b.stderr_exponent == pytest.approx(a.stderr_exponent, rel=1e-7)
    assert b.r_squared == pytest.approx(a.r_squared, rel=1e-12)
    assert b.classification is a.classification
    assert b.intercept != pytest.approx(a.intercept)


def test_split_no_jumps_and_single_jump():
    bars = bars_with([100, 200, 5000, 300])
    tab = JumpTable(np.array(["2021-03-01"] * 3, dtype="datetime64[D]"), np.array([1, 2, 3]),
                    np.zeros(3, bool), np.array([1, -1, 1]))
    split = split_by_jump(bars, tab)
    assert len(split.jump_samples) == 0 and split.nonjump_samples.tolist() == [200, 5000, 300]
    tab.is_jump[1] = True
    assert split_by_jump(bars, tab).jump_samples.tolist() == [5000]


def test_split_matches_synthetic_ledger(small_spec, small_ledger):
    from flashcrash.lobster import load_day
    from flashcrash.bars import build_minute_bars
    from flashcrash.synth import gen_lobster_frames

    parts = []
    for d in small_ledger.dates:
        m, bk = gen_lobster_frames(small_spec, small_ledger, d)
        m, bk = load_day(m.to_csv().encode(), bk.to_csv().encode())
        parts.append(build_minute_bars(m, bk, d.item()))
    bars = MinuteBars.concat(parts)
    days, idx = np.nonzero(np.ones_like(small_ledger.jump_mask))
    keep = idx >= 1
    tab = JumpTable(small_ledger.dates[days[keep]], idx[keep], small_ledger.jump_mask[days[keep], idx[keep]],
                    small_ledger.jump_sign[days[keep], idx[keep]].astype(np.int64))
    split = split_by_jump(bars, tab)
    truth = small_ledger.volumes[Category.TRADE]
    assert np.array_equal(np.sort(split.jump_samples), np.sort(truth[small_ledger.jump_mask]))
    pos = small_ledger.jump_mask & (small_ledger.jump_sign > 0)
    assert np.array_equal(np.sort(split.jump_positive), np.sort(truth[pos]))
    assert len(split.nonjump_samples) == (~small_ledger.jump_mask[:, 1:]).sum()
