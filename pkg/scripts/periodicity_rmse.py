#!/usr/bin/env python3
"""How well the periodicity factors are recovered as the sample grows.

Data: flat volatility except a factor on the first minutes of each day.
Prints the RMSE of f_hat / f - 1 for the intraday and intraweek estimates,
and the false-positive minute rate with and without filtering.

    python3 scripts/periodicity_rmse.py --days 50 125 250 500 1000
"""

import argparse
import math

import numpy as np

from flashcrash.jumps import DetectorConfig, PeriodicityMode, detect_jumps, estimate_periodicity
from flashcrash.synth import SyntheticSpec, generate


def rmse(est, truth):
    return math.sqrt(float(np.mean((est / truth - 1) ** 2)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--days", type=int, nargs="+", default=[50, 125, 250, 500])
    ap.add_argument("--factor", type=float, default=2.0)
    ap.add_argument("--minutes", type=int, default=30)
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()

    print(f"{'days':>5} {'rmse_day':>9} {'rmse_week':>9} {'fp_off':>9} {'fp_day':>9} {'fp_week':>9}")
    for n_days in args.days:
        stats = []
        for rep in range(args.reps):
            spec = SyntheticSpec(seed=1000 * n_days + rep, n_days=n_days, jump_rate=0.0,
                                 diurnal_open_factor=args.factor, diurnal_open_minutes=args.minutes)
            ret = generate(spec).true_returns()
            truth = spec.profile()[1:]
            truth = truth / math.sqrt(np.mean(truth**2))
            day = estimate_periodicity(ret, PeriodicityMode.INTRADAY)
            week = estimate_periodicity(ret, PeriodicityMode.INTRAWEEK)
            fp = [
                detect_jumps(ret, p, DetectorConfig(periodicity=m)).is_jump.mean()
                for m, p in ((PeriodicityMode.OFF, None), (PeriodicityMode.INTRADAY, day),
                             (PeriodicityMode.INTRAWEEK, week))
            ]
            stats.append([rmse(day.factors[1:], truth),
                          rmse(week.factors.reshape(5, -1)[:, 1:], truth), *fp])
        m = np.mean(stats, axis=0)
        print(f"{n_days:>5} {m[0]:>9.4f} {m[1]:>9.4f} {m[2]:>9.2e} {m[3]:>9.2e} {m[4]:>9.2e}")


if __name__ == "__main__":
    main()
