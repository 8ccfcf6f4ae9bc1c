"""Nested-window convergence analysis.

The observed property (a distribution of durations) is measured on windows
``[0, l_1) ⊂ [0, l_2) ⊂ ... ⊂ [0, l_n)``.  Each window's CCDF is compared
to the longest window's with the Monge-Kantorovich distance, and the
resulting curve is tested for convergence by :func:`detect`.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from . import sessions as _sessions
from .distrib import Ccdf, ccdf, format_float, mk_distance, moments, trim_extremes
from .trace import ObservationWindow, Trace, slice_trace

DEFAULT_EPSILON = 0.01
DEFAULT_DELTA = 0.02
DEFAULT_TAIL_FRACTION = 0.25

PROPERTIES = ("sessions", "lifetimes-gap", "lifetimes-span", "gaps")


class ScheduleError(ValueError):
    """The window schedule is invalid, or too long for the trace."""


class AnalysisError(ValueError):
    """The curve cannot be built or judged."""


class EmptyPropertyError(AnalysisError):
    """The property has no observations even in the longest window."""


@dataclass(frozen=True)
class WindowSchedule:
    lengths: tuple[int, ...]

    def __post_init__(self) -> None:
        lengths = tuple(int(x) for x in self.lengths)
        if len(lengths) < 2:
            raise ScheduleError("a schedule needs at least two window lengths")
        if lengths[0] <= 0:
            raise ScheduleError("window lengths must be > 0")
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ScheduleError(f"window lengths must be strictly increasing: {lengths}")
        object.__setattr__(self, "lengths", lengths)

    @property
    def l_max(self) -> int:
        return self.lengths[-1]

    def __len__(self) -> int:
        return len(self.lengths)

    def check(self, trace: Trace) -> None:
        if self.l_max > trace.horizon:
            raise ScheduleError(
                f"longest window {self.l_max} s exceeds the trace horizon {trace.horizon} s"
            )


def schedule_geometric(l_min: int, l_max: int, factor: float = 2.0) -> WindowSchedule:
    """``l_min, ceil(l_min * factor), ...`` capped so the last length is ``l_max``."""
    if not 0 < l_min < l_max:
        raise ScheduleError(f"need 0 < l_min < l_max, got l_min={l_min}, l_max={l_max}")
    if not factor > 1:
        raise ScheduleError(f"factor must be > 1, got {factor}")
    lengths = [int(l_min)]
    while True:
        nxt = math.ceil(lengths[-1] * factor)
        if nxt >= l_max:
            break
        if nxt > lengths[-1]:
            lengths.append(nxt)
    lengths.append(int(l_max))
    return WindowSchedule(tuple(lengths))


# -- property extractors -----------------------------------------------------


@dataclass(frozen=True)
class Extractor:
    """Maps a (windowed) trace to the multiset of durations to characterize.

    ``name`` is one of ``sessions``, ``lifetimes-gap``, ``lifetimes-span``
    and ``gaps``; ``threshold`` applies to the first two and ``key`` to
    ``gaps``.
    """

    name: str
    threshold: int = _sessions.DEFAULT_THRESHOLD
    key: str = "actor"

    def __post_init__(self) -> None:
        if self.name not in PROPERTIES:
            raise ValueError(f"unknown property {self.name!r}; expected one of {PROPERTIES}")
        _sessions.GapThreshold(self.threshold)
        if self.key not in ("actor", "object"):
            raise ValueError(f"key must be 'actor' or 'object', got {self.key!r}")

    def __call__(self, trace: Trace) -> np.ndarray:
        if self.name == "sessions":
            return _sessions.sessionize(trace, self.threshold).lengths
        if self.name == "lifetimes-gap":
            return _sessions.lifetimes_gap(trace, self.threshold).lengths
        if self.name == "lifetimes-span":
            return _sessions.lifetimes_span(trace).lengths
        return _sessions.gap_distribution(trace, self.key)

    def describe(self) -> dict[str, object]:
        out: dict[str, object] = {"property": self.name}
        if self.name in ("sessions", "lifetimes-gap"):
            out["threshold"] = self.threshold
        if self.name == "gaps":
            out["key"] = self.key
        return out


def session_lengths(threshold: int = _sessions.DEFAULT_THRESHOLD) -> Extractor:
    return Extractor("sessions", threshold)


def gap_lifetimes(threshold: int = _sessions.DEFAULT_THRESHOLD) -> Extractor:
    return Extractor("lifetimes-gap", threshold)


def span_lifetimes() -> Extractor:
    return Extractor("lifetimes-span")


def raw_gaps(key: str = "actor") -> Extractor:
    return Extractor("gaps", key=key)


# -- curve -------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    length: int
    count: int
    mk: float | None
    mean: float | None
    std: float | None

    @property
    def defined(self) -> bool:
        return self.count > 0


@dataclass(frozen=True)
class ConvergenceCurve:
    property: str
    schedule: WindowSchedule
    points: tuple[CurvePoint, ...]
    ccdfs: tuple[Ccdf | None, ...] = field(repr=False, compare=False)
    trim: float | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def defined_points(self) -> list[CurvePoint]:
        return [p for p in self.points if p.defined]

    @property
    def undefined_lengths(self) -> list[int]:
        """Windows where the property had no observations."""
        return [p.length for p in self.points if not p.defined]

    def to_csv(self, stream: TextIO) -> None:
        """Write ``l,mk,mean,std,count``; undefined values are left empty."""
        stream.write("l,mk,mean,std,count\n")
        for p in self.points:
            cells = ["" if v is None else format_float(v) for v in (p.mk, p.mean, p.std)]
            stream.write(f"{p.length},{cells[0]},{cells[1]},{cells[2]},{p.count}\n")


def _measure(trace: Trace, extractor: Callable[[Trace], np.ndarray], length: int, trim: float | None):
    durations = extractor(slice_trace(trace, ObservationWindow(0, length)))
    if len(durations) == 0:
        return None, None
    if trim is not None:
        durations = trim_extremes(durations, trim)
    return ccdf(durations), moments(durations)


def analyze(
    trace: Trace,
    extractor: Callable[[Trace], np.ndarray],
    schedule: WindowSchedule | Sequence[int],
    trim: float | None = None,
    *,
    workers: int = 1,
) -> ConvergenceCurve:
    """Measure the property on every window ``[0, l)`` of the schedule.

    Each point's ``mk`` is the distance to the longest window's CCDF, so
    the last point is always 0.  Windows with no observations are kept in
    the curve with ``mk``/``mean``/``std`` set to ``None``.
    """
    if not isinstance(schedule, WindowSchedule):
        schedule = WindowSchedule(tuple(schedule))
    schedule.check(trace)
    if trim is not None and not 0 < trim <= 1:
        raise ValueError(f"trim quantile must be in (0, 1], got {trim}")

    # build the grouping permutations once; every window slice reuses them
    if len(trace):
        trace.actor_order
        trace.object_order

    def run(length: int):
        return _measure(trace, extractor, length, trim)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            measured = list(pool.map(run, schedule.lengths))
    else:
        measured = [run(length) for length in schedule.lengths]

    ref = measured[-1][0]
    name = getattr(extractor, "name", getattr(extractor, "__name__", "property"))
    if ref is None:
        raise EmptyPropertyError(
            f"property {name!r} has no observations in the longest window ({schedule.l_max} s)"
        )
    points = []
    for length, (dist, mom) in zip(schedule.lengths, measured):
        if dist is None:
            points.append(CurvePoint(length, 0, None, None, None))
        else:
            points.append(CurvePoint(length, mom.count, mk_distance(dist, ref), mom.mean, mom.std))
    return ConvergenceCurve(name, schedule, tuple(points), tuple(m[0] for m in measured), trim)


# -- verdict -----------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    status: str  # "characterized" | "not_characterized"
    l_star: int | None
    reason: str | None  # "still_decreasing" | "fluctuating"
    epsilon: float
    delta: float
    tail_fraction: float

    def __post_init__(self) -> None:
        if self.status == "characterized":
            ok = self.l_star is not None and self.reason is None
        elif self.status == "not_characterized":
            ok = self.l_star is None and self.reason in ("still_decreasing", "fluctuating")
        else:
            ok = False
        if not ok:
            raise ValueError(f"inconsistent verdict: {self.status}, {self.l_star}, {self.reason}")

    @property
    def characterized(self) -> bool:
        return self.status == "characterized"

    def describe(self) -> str:
        if self.characterized:
            return f"characterized: the property is stable from l = {self.l_star} s onward"
        if self.reason == "still_decreasing":
            return (
                "not characterized: the distance to the longest window is still decreasing; "
                "either the observation window is too short or the property is not stationary"
            )
        return (
            "not characterized: the curve has not settled; "
            "either the observation window is too short or the property is not stationary"
        )

    def to_dict(self) -> dict[str, object]:
        return {
            "status": self.status,
            "l_star": self.l_star,
            "reason": self.reason,
            "parameters": {
                "epsilon": self.epsilon,
                "delta": self.delta,
                "tail_fraction": self.tail_fraction,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def tail_size(n: int, tail_fraction: float) -> int:
    """Number of points in the decision tail for a curve of ``n`` defined points."""
    return min(n - 1, max(2, math.ceil(round(tail_fraction * n, 9))))


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean()
    return float((x * (y - y.mean())).sum() / (x * x).sum())


def detect(
    curve: ConvergenceCurve,
    epsilon: float = DEFAULT_EPSILON,
    delta: float = DEFAULT_DELTA,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
) -> Verdict:
    """Decide whether the curve has converged.

    Over the tail (the last ``ceil(tail_fraction * n)`` defined points, at
    least 2, not counting the final self-comparison point) every ``mk`` must
    be ``<= epsilon`` and every step in the mean, including the step to the
    final window, must be ``<= delta`` relative to the final mean.  ``l*`` is
    then the start of the trailing run of ``mk <= epsilon``.

    Otherwise the curve is ``still_decreasing`` when the least-squares slope
    of ``mk`` over the tail predicts a drop larger than ``epsilon`` across
    the tail, and ``fluctuating`` when it does not.
    """
    if not epsilon > 0 or not delta > 0:
        raise ValueError("epsilon and delta must be > 0")
    if not 0 < tail_fraction < 1:
        raise ValueError(f"tail_fraction must be in (0, 1), got {tail_fraction}")
    pts = curve.defined_points
    if len(pts) < 3:
        raise AnalysisError(f"need at least 3 defined curve points, got {len(pts)}")
    if pts[-1] is not curve.points[-1]:
        raise AnalysisError("the longest window must be defined")

    final = pts[-1]
    body = pts[:-1]
    m = tail_size(len(pts), tail_fraction)
    tail = body[-m:]
    params = dict(epsilon=epsilon, delta=delta, tail_fraction=tail_fraction)

    mk_ok = all(p.mk <= epsilon for p in tail)
    means = [p.mean for p in tail] + [final.mean]
    steps = [abs(b - a) for a, b in zip(means, means[1:])]
    mean_ok = all(s <= delta * abs(final.mean) for s in steps)

    if mk_ok and mean_ok:
        start = len(body)
        while start > 0 and body[start - 1].mk <= epsilon:
            start -= 1
        return Verdict("characterized", body[start].length, None, **params)

    x = np.array([p.length for p in tail], dtype=np.float64)
    y = np.array([p.mk for p in tail], dtype=np.float64)
    slope = _slope(x, y)
    drop = -slope * (x[-1] - x[0])
    reason = "still_decreasing" if slope < 0 and drop > epsilon else "fluctuating"
    return Verdict("not_characterized", None, reason, **params)
