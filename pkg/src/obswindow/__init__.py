"""Observation-window sufficiency analysis for duration properties of event traces."""

from .distrib import Ccdf, Moments, ccdf, mk_distance, moments, trim_extremes
from .engine import (
    AnalysisError,
    ConvergenceCurve,
    CurvePoint,
    EmptyPropertyError,
    Extractor,
    ScheduleError,
    Verdict,
    WindowSchedule,
    analyze,
    detect,
    schedule_geometric,
)
from .sessions import (
    GapThreshold,
    Lifetime,
    Session,
    gap_distribution,
    lifetimes_gap,
    lifetimes_span,
    sessionize,
)
from .synth import Exponential, GeneratorSpec, Pareto, generate, ground_truth_ccdf
from .trace import (
    Event,
    IngestError,
    ObservationWindow,
    Trace,
    ValidationReport,
    ingest,
    read_trace,
    serialize,
    slice_trace,
    validate,
)

__version__ = "0.1.0"
