#!/usr/bin/env python3
"""Monte Carlo size and power of the jump detector on Gaussian null series.

    python3 scripts/detector_size.py --series 1000 --alpha 0.01
"""

import argparse
import json
import math
import time

import numpy as np

from flashcrash.bars import ReturnSeries
from flashcrash.jumps import DetectorConfig, PeriodicityMode, detect_jumps


def run(n_series, n_days, alpha, jump_sigmas, seed):
    cfg = DetectorConfig(alpha=alpha, periodicity=PeriodicityMode.OFF)
    n = n_days * 390
    any_hit = found = 0
    for k in range(n_series):
        rng = np.random.default_rng([seed, k])
        r = 1e-3 * rng.standard_normal(n)
        any_hit += detect_jumps(ReturnSeries.from_array(r), config=cfg).n_jumps > 0
        at = int(rng.integers(cfg.window, n))
        r[at] = rng.choice([-1, 1]) * jump_sigmas * 1e-3
        found += bool(detect_jumps(ReturnSeries.from_array(r), config=cfg).is_jump[at - cfg.window])
    size = any_hit / n_series
    return {
        "series": n_series,
        "days": n_days,
        "alpha": alpha,
        "size": size,
        "size_se": math.sqrt(size * (1 - size) / n_series),
        "power": found / n_series,
        "jump_sigmas": jump_sigmas,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--series", type=int, default=200)
    ap.add_argument("--days", type=int, default=250)
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.01, 0.05])
    ap.add_argument("--jump-sigmas", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()

    rows = []
    for a in args.alpha:
        t0 = time.perf_counter()
        row = run(args.series, args.days, a, args.jump_sigmas, args.seed)
        row["seconds"] = round(time.perf_counter() - t0, 2)
        rows.append(row)
        print(f"alpha={a:<6g} size={row['size']:.4f} +/- {row['size_se']:.4f}  "
              f"power@{args.jump_sigmas:g}sd={row['power']:.3f}  ({row['seconds']}s)")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
