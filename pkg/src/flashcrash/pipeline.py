"""Ingest -> bars -> jump detection -> regime split -> tail fits."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .bars import Category, MinuteBars, SessionSpec, build_minute_bars, log_returns, write_bars_csv
from .config import apply_overrides, read_key_values
from .errors import ConfigError, EmptyInput, FlashCrashError, InsufficientTail, ParseError
from .jumps import (
    DetectorConfig,
    JumpResults,
    JumpTable,
    PeriodicityMode,
    PeriodicityProfile,
    detect_jumps,
    estimate_periodicity,
    write_jumps_csv,
)
from .lobster import Strictness, find_day_files, load_day
from .synth import SyntheticSpec, gen_lobster_frames, generate
from .tails import TailFit, fit_tail, split_by_jump, write_ccdf_csv

log = logging.getLogger(__name__)

REGIMES = ("all", "jump", "nonjump", "jump_positive", "jump_negative", "jump_plus_nonjump_merged")


@dataclass(frozen=True)
class PipelineConfig:
    inputs: tuple[str, ...] = ()
    synthetic_spec: Optional[str] = None
    open_time: int = 34_200
    close_time: int = 57_600
    bar_width: int = 60
    window: int = 390
    alpha: float = 0.01
    periodicity: PeriodicityMode = PeriodicityMode.INTRAWEEK
    min_slot_obs: int = 10
    q_lo: float = 0.90
    q_hi: float = 0.999
    category: Category = Category.TRADE
    include_hidden: bool = True
    exclude_after_halt: bool = True
    strictness: Strictness = Strictness.FAIL
    output_dir: str = "out"

    def __post_init__(self):
        # accept plain strings for the enum fields
        for name, kind in (("periodicity", PeriodicityMode), ("category", Category), ("strictness", Strictness)):
            value = getattr(self, name)
            if not isinstance(value, kind):
                try:
                    object.__setattr__(self, name, kind(value))
                except ValueError as exc:
                    raise ConfigError(f"{name}: {exc}") from exc

    def session(self) -> SessionSpec:
        try:
            return SessionSpec(self.open_time, self.close_time, self.bar_width)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def detector(self) -> DetectorConfig:
        try:
            return DetectorConfig(self.window, self.alpha, self.periodicity, self.min_slot_obs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self, synthetic: SyntheticSpec | None = None) -> None:
        sources = bool(self.inputs) + (self.synthetic_spec is not None or synthetic is not None)
        if sources != 1:
            raise ConfigError("give exactly one input source: LOBSTER files or a synthetic spec")
        if not 0 <= self.q_lo < self.q_hi <= 1:
            raise ConfigError(f"need 0 <= q_lo < q_hi <= 1, got ({self.q_lo}, {self.q_hi})")
        self.session()
        self.detector()

    @classmethod
    def from_file(cls, path: str | Path, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        return apply_overrides(base or cls(), read_key_values(path))


def load_synthetic_spec(path: str | Path, overrides: dict[str, str] | None = None) -> SyntheticSpec:
    values = read_key_values(path)
    values.update(overrides or {})
    return apply_overrides(SyntheticSpec(), values)


# ---------------------------------------------------------------------------
# stages


@dataclass
class IngestSummary:
    days: int = 0
    messages: int = 0
    files: list[str] = field(default_factory=list)


def iter_day_bars(config: PipelineConfig, summary: IngestSummary | None = None) -> Iterator[MinuteBars]:
    session = config.session()
    for day in find_day_files(config.inputs):
        try:
            msgs, book = load_day(day.message, day.orderbook, config.strictness)
        except ParseError as exc:
            if exc.source is None:
                exc.located(source=str(day.message))
            raise
        if summary is not None:
            summary.days += 1
            summary.messages += len(msgs)
            summary.files.append(day.message.name)
        yield build_minute_bars(
            msgs, book, day.date, session,
            include_hidden=config.include_hidden, exclude_after_halt=config.exclude_after_halt,
        )


def iter_synthetic_bars(spec: SyntheticSpec, config: PipelineConfig) -> Iterator[MinuteBars]:
    """Generate each day's files in memory and run them through the parser."""
    ledger = generate(spec)
    session = spec.session()
    for day in ledger.dates:
        msgs, book = gen_lobster_frames(spec, ledger, day)
        m, b = load_day(msgs.to_csv().encode("ascii"), book.to_csv().encode("ascii"), config.strictness)
        yield build_minute_bars(
            m, b, day.item(), session,
            include_hidden=config.include_hidden, exclude_after_halt=config.exclude_after_halt,
        )


def build_bars(config: PipelineConfig, synthetic: SyntheticSpec | None = None) -> MinuteBars:
    if synthetic is None and config.synthetic_spec is not None:
        synthetic = load_synthetic_spec(config.synthetic_spec)
    parts = list(iter_synthetic_bars(synthetic, config) if synthetic is not None else iter_day_bars(config))
    if not parts:
        raise ParseError("no input days found")
    return MinuteBars.concat(parts)


def run_detection(bars: MinuteBars, config: PipelineConfig) -> tuple[JumpResults, PeriodicityProfile | None]:
    returns = log_returns(bars)
    det = config.detector()
    profile = None
    if det.periodicity is not PeriodicityMode.OFF:
        profile = estimate_periodicity(returns, det.periodicity, det.min_slot_obs)
    return detect_jumps(returns, profile, det), profile


def detector_summary(results: JumpResults, config: PipelineConfig) -> dict:
    return {
        "window": config.window,
        "alpha": config.alpha,
        "periodicity": config.periodicity.value,
        "n_tested": len(results),
        "c_n": results.c_n,
        "s_n": results.s_n,
        "beta_star": results.beta_star,
        "threshold": results.threshold,
        "undefined": int(results.undefined.sum()),
    }


# ---------------------------------------------------------------------------
# report


def round_sig(obj, digits: int = 12):
    """Round every float in a JSON-like structure to ``digits`` significant digits."""
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return None
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    if isinstance(obj, np.generic):
        return round_sig(obj.item(), digits)
    return obj


@dataclass
class PipelineReport:
    fits: dict[str, TailFit]
    fit_errors: dict[str, dict]
    jump_counts: dict[str, int]
    bars_processed: int
    skipped: dict[str, int]
    detector: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    samples: dict[str, int] = field(default_factory=dict)

    def to_json(self, config: PipelineConfig | None = None, timestamp: bool = True) -> dict:
        fits = {}
        for regime in REGIMES:
            if regime in self.fits:
                fits[regime] = self.fits[regime].summary(regime)
            else:
                fits[regime] = {"regime": regime, **self.fit_errors.get(regime, {})}
            fits[regime]["n_samples"] = self.samples.get(regime, 0)
        out = {
            "bars_processed": self.bars_processed,
            "skipped": self.skipped,
            "detector": self.detector,
            "jump_counts": self.jump_counts,
            "fits": fits,
            "warnings": self.warnings,
        }
        if config is not None:
            cfg = asdict(config)
            for k, v in cfg.items():
                if hasattr(v, "value"):
                    cfg[k] = v.value
            cfg["inputs"] = list(config.inputs)
            out["config"] = cfg
        if timestamp:
            out["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return round_sig(out)


def fit_regimes(
    bars: MinuteBars,
    jumps: JumpResults | JumpTable,
    config: PipelineConfig,
    detector: dict | None = None,
    out_dir: Path | None = None,
) -> PipelineReport:
    returns = log_returns(bars)
    split = split_by_jump(bars, jumps, config.category)
    samples = {"all": bars.volume[config.category][~bars.halted], **split.regimes()}
    fits: dict[str, TailFit] = {}
    errors: dict[str, dict] = {}
    warnings: list[str] = []
    for regime in REGIMES:
        x = samples[regime]
        try:
            fits[regime] = fit_tail(x, config.q_lo, config.q_hi)
        except (InsufficientTail, EmptyInput) as exc:
            errors[regime] = {"error": "InsufficientTail", "message": str(exc)}
            warnings.append(f"{regime}: {exc}")
        except FlashCrashError as exc:
            errors[regime] = {"error": type(exc).__name__, "message": str(exc)}
            warnings.append(f"{regime}: {exc}")
        if out_dir is not None:
            write_ccdf_csv(x, out_dir / f"ccdf_{regime}.csv")

    if isinstance(jumps, JumpResults):
        jumps = JumpTable.from_results(jumps)
    skipped = {k: v for k, v in returns.summary.items() if k not in ("bars", "returns")}
    return PipelineReport(
        fits=fits,
        fit_errors=errors,
        jump_counts={
            "total": int(jumps.is_jump.sum()),
            "positive": int((jumps.is_jump & (jumps.sign > 0)).sum()),
            "negative": int((jumps.is_jump & (jumps.sign < 0)).sum()),
        },
        bars_processed=len(bars),
        skipped=skipped,
        detector=detector or {},
        warnings=warnings,
        samples={k: int(len(v)) for k, v in samples.items()},
    )


def write_periodicity_csv(profile: PeriodicityProfile, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("slot,factor,sample_count\n")
        for s, (f, n) in enumerate(zip(profile.factors.tolist(), profile.sample_counts.tolist())):
            fh.write(f"{s},{f:.12g},{n}\n")


def run_pipeline(config: PipelineConfig, synthetic: SyntheticSpec | None = None) -> PipelineReport:
    """Run every stage and write bars.csv, jumps.csv, ccdf_<regime>.csv and report.json."""
    config.validate(synthetic)
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc

    bars = build_bars(config, synthetic)
    write_bars_csv(bars, out / "bars.csv")
    results, profile = run_detection(bars, config)
    write_jumps_csv(results, out / "jumps.csv")
    if profile is not None:
        write_periodicity_csv(profile, out / "periodicity.csv")
    det = detector_summary(results, config)
    report = fit_regimes(bars, results, config, det, out)
    (out / "report.json").write_text(json.dumps(report.to_json(config), indent=2) + "\n")
    for w in report.warnings:
        log.warning(w)
    return report
