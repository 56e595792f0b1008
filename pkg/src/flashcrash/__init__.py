"""Flash-crash volume statistics from LOBSTER-style order flow."""

from .bars import Category, MinuteBars, ReturnSeries, SessionSpec, build_minute_bars, log_returns
from .jumps import (
    DetectorConfig,
    PeriodicityMode,
    PeriodicityProfile,
    bipower_local_vol,
    detect_jumps,
    estimate_periodicity,
    gumbel_threshold,
)
from .lobster import (
    BookSnapshot,
    EventType,
    OrderFlowEvent,
    Side,
    Strictness,
    parse_message_line,
    read_message_file,
    read_orderbook_file,
    write_message_file,
)
from .pipeline import PipelineConfig, PipelineReport, run_pipeline
from .synth import SyntheticSpec, gen_lobster_day, gen_return_series, gen_volume_series, pareto_sample
from .tails import Boundedness, TailFit, classify_boundedness, eccdf, fit_tail, split_by_jump

__version__ = "0.1.0"
