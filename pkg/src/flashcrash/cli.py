"""Command line entry point.

Subcommands: simulate, ingest, bars, jumps, tails, pipeline. Settings come
from defaults, then ``--config`` (key=value file), then explicit flags.
Exit codes: 0 success, 2 config error, 3 parse error, 4 computation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .bars import read_bars_csv, write_bars_csv
from .config import apply_overrides, read_key_values
from .errors import ConfigError, FlashCrashError
from .jumps import read_jumps_csv, write_jumps_csv
from .lobster import Strictness
from .pipeline import (
    IngestSummary,
    PipelineConfig,
    build_bars,
    detector_summary,
    fit_regimes,
    iter_day_bars,
    load_synthetic_spec,
    run_detection,
    run_pipeline,
    write_periodicity_csv,
)
from .synth import write_dataset

log = logging.getLogger("flashcrash")

S = argparse.SUPPRESS


def _add_session(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("session")
    g.add_argument("--open-time", type=int, default=S, help="seconds after midnight (34200)")
    g.add_argument("--close-time", type=int, default=S, help="seconds after midnight (57600)")
    g.add_argument("--bar-width", type=int, default=S, help="seconds (60)")
    g.add_argument("--exclude-hidden", dest="include_hidden", action="store_false", default=S,
                   help="count only visible executions (type 4) as trades")
    g.add_argument("--keep-after-halt", dest="exclude_after_halt", action="store_false", default=S)
    g.add_argument("--skip-bad-lines", dest="strictness", action="store_const",
                   const=Strictness.SKIP_AND_WARN.value, default=S)


def _add_detector(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("jump detector")
    g.add_argument("--window", type=int, default=S, help="local volatility window K (390)")
    g.add_argument("--alpha", type=float, default=S, help="significance level (0.01)")
    g.add_argument("--periodicity", choices=["off", "intraday", "intraweek"], default=S)
    g.add_argument("--min-slot-obs", type=int, default=S)


def _add_tails(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tail fit")
    g.add_argument("--q-lo", type=float, default=S, help="lower tail quantile (0.90)")
    g.add_argument("--q-hi", type=float, default=S, help="upper tail quantile (0.999)")
    g.add_argument("--category", choices=["trade", "limit", "cancel"], default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flashcrash", description="Flash-crash volume statistics from LOBSTER-style order flow.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic LOBSTER files and a ledger")
    p.add_argument("--spec", help="key=value synthetic spec file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a spec key")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ingest", help="parse and validate LOBSTER file pairs")
    p.add_argument("inputs", nargs="+", help="directories or files")
    p.add_argument("--config")
    p.add_argument("--out", dest="output_dir", default=S)
    _add_session(p)

    p = sub.add_parser("bars", help="LOBSTER files -> bars.csv")
    p.add_argument("inputs", nargs="*", default=S)
    p.add_argument("--synthetic", dest="synthetic_spec", default=S)
    p.add_argument("--config")
    p.add_argument("--out", dest="output_dir", default=S)
    _add_session(p)

    p = sub.add_parser("jumps", help="bars.csv -> jumps.csv")
    p.add_argument("--bars", required=True)
    p.add_argument("--config")
    p.add_argument("--out", dest="output_dir", default=S)
    _add_detector(p)

    p = sub.add_parser("tails", help="bars.csv + jumps.csv -> report.json and CCDFs")
    p.add_argument("--bars", required=True)
    p.add_argument("--jumps", required=True)
    p.add_argument("--config")
    p.add_argument("--out", dest="output_dir", default=S)
    _add_tails(p)

    p = sub.add_parser("pipeline", help="run every stage")
    p.add_argument("inputs", nargs="*", default=S)
    p.add_argument("--synthetic", dest="synthetic_spec", default=S)
    p.add_argument("--config")
    p.add_argument("--out", dest="output_dir", default=S)
    _add_session(p)
    _add_detector(p)
    _add_tails(p)
    return parser


_NOT_CONFIG = {"command", "verbose", "config", "bars", "jumps", "spec", "set", "out"}


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = apply_overrides(cfg, read_key_values(args.config))
    flags = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    if "inputs" in flags:
        flags["inputs"] = ",".join(flags["inputs"])
    return apply_overrides(cfg, {k: str(v) for k, v in flags.items()})


def _out_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_simulate(args) -> int:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip().replace("-", "_")] = v.strip()
    if args.spec:
        spec = load_synthetic_spec(args.spec, overrides)
    else:
        from .synth import SyntheticSpec

        spec = apply_overrides(SyntheticSpec(), overrides)
    ledger = write_dataset(spec, args.out)
    print(f"wrote {len(ledger.dates)} days, {int(ledger.jump_mask.sum())} jumps to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    cfg = resolve_config(args)
    summary = IngestSummary()
    n_bars = sum(len(b) for b in iter_day_bars(cfg, summary))
    result = {"days": summary.days, "messages": summary.messages, "bars": n_bars, "files": summary.files}
    if "output_dir" in vars(args):
        (_out_dir(cfg) / "ingest.json").write_text(json.dumps(result, indent=2) + "\n")
    print(json.dumps({k: v for k, v in result.items() if k != "files"}))
    return 0


def cmd_bars(args) -> int:
    cfg = resolve_config(args)
    cfg.validate()
    bars = build_bars(cfg)
    out = _out_dir(cfg)
    write_bars_csv(bars, out / "bars.csv")
    print(f"{len(bars)} bars -> {out / 'bars.csv'}")
    return 0


def cmd_jumps(args) -> int:
    cfg = resolve_config(args)
    cfg.detector()
    bars = read_bars_csv(args.bars)
    results, profile = run_detection(bars, cfg)
    out = _out_dir(cfg)
    write_jumps_csv(results, out / "jumps.csv")
    if profile is not None:
        write_periodicity_csv(profile, out / "periodicity.csv")
    (out / "detector.json").write_text(json.dumps(detector_summary(results, cfg), indent=2) + "\n")
    print(f"{results.n_jumps} jumps in {len(results)} tested minutes -> {out / 'jumps.csv'}")
    return 0


def cmd_tails(args) -> int:
    from .pipeline import round_sig

    cfg = resolve_config(args)
    if not 0 <= cfg.q_lo < cfg.q_hi <= 1:
        raise ConfigError(f"need 0 <= q_lo < q_hi <= 1, got ({cfg.q_lo}, {cfg.q_hi})")
    bars = read_bars_csv(args.bars)
    jumps = read_jumps_csv(args.jumps)
    det_path = Path(args.jumps).with_name("detector.json")
    detector = json.loads(det_path.read_text()) if det_path.exists() else {}
    out = _out_dir(cfg)
    report = fit_regimes(bars, jumps, cfg, detector, out)
    (out / "report.json").write_text(json.dumps(report.to_json(cfg), indent=2) + "\n")
    for w in report.warnings:
        log.warning(w)
    _print_fits(round_sig(report.to_json(timestamp=False)))
    return 0


def _print_fits(report: dict) -> None:
    for regime, fit in report["fits"].items():
        if "exponent" in fit:
            print(f"{regime:26s} mu={fit['exponent']:.4f} r2={fit['r2']:.4f} "
                  f"n={fit['n_points']:<6d} {fit['classification']}")
        else:
            print(f"{regime:26s} {fit.get('error', 'n/a')} (n_samples={fit['n_samples']})")
    print("jumps:", report["jump_counts"])


def cmd_pipeline(args) -> int:
    cfg = resolve_config(args)
    report = run_pipeline(cfg)
    _print_fits(report.to_json(timestamp=False))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "bars": cmd_bars,
    "jumps": cmd_jumps,
    "tails": cmd_tails,
    "pipeline": cmd_pipeline,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except FlashCrashError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
