"""Session and file-lifetime inference from stand-alone events.

Consecutive events sharing a key (the actor for sessions, the object for
lifetimes) join the same run while the gap between them is at most the
threshold; a strictly larger gap starts a new run.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import overload

import numpy as np

from .trace import Trace

DEFAULT_THRESHOLD = 10_800


@dataclass(frozen=True)
class GapThreshold:
    seconds: int = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        if isinstance(self.seconds, bool) or not isinstance(self.seconds, (int, np.integer)):
            raise TypeError(f"threshold must be an integer number of seconds, got {self.seconds!r}")
        if self.seconds <= 0:
            raise ValueError(f"threshold must be > 0, got {self.seconds}")


def _as_threshold(threshold: GapThreshold | int) -> int:
    if not isinstance(threshold, GapThreshold):
        threshold = GapThreshold(threshold)
    return int(threshold.seconds)


@dataclass(frozen=True)
class Session:
    actor: str
    start: int
    end: int
    events: int = 1

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError("session end precedes its start")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Lifetime:
    object: str
    length: int
    definition: str  # "gap" or "span"

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError("lifetime length must be >= 0")
        if self.definition not in ("gap", "span"):
            raise ValueError(f"unknown lifetime definition {self.definition!r}")


@dataclass(frozen=True)
class _Runs:
    keys: np.ndarray  # vocabulary code per run
    starts: np.ndarray
    ends: np.ndarray
    counts: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        return self.ends - self.starts


def _runs(times: np.ndarray, keys: np.ndarray, threshold: int | None) -> _Runs:
    """Cut grouped, time-ordered events into runs.

    ``times``/``keys`` must already be grouped by key with time order kept
    inside each group.  ``threshold=None`` never cuts on gaps (one run per
    key).
    """
    n = len(times)
    if n == 0:
        z = np.empty(0, dtype=np.int64)
        return _Runs(z, z, z, z)
    cut = np.empty(n, dtype=bool)
    cut[0] = True
    np.not_equal(keys[1:], keys[:-1], out=cut[1:])
    if threshold is not None:
        cut[1:] |= np.diff(times) > threshold
    first = np.flatnonzero(cut)
    last = np.empty_like(first)
    last[:-1] = first[1:] - 1
    last[-1] = n - 1
    return _Runs(keys[first], times[first], times[last], last - first + 1)


class SessionTable(Sequence[Session]):
    """Sessions ordered by (actor, start), stored column-wise."""

    def __init__(self, runs: _Runs, actor_names: np.ndarray):
        self._runs = runs
        self._names = actor_names

    @property
    def starts(self) -> np.ndarray:
        return self._runs.starts

    @property
    def ends(self) -> np.ndarray:
        return self._runs.ends

    @property
    def lengths(self) -> np.ndarray:
        return self._runs.lengths

    @property
    def event_counts(self) -> np.ndarray:
        return self._runs.counts

    @property
    def actor_codes(self) -> np.ndarray:
        return self._runs.keys

    def __len__(self) -> int:
        return len(self._runs.starts)

    @overload
    def __getitem__(self, i: int) -> Session: ...
    @overload
    def __getitem__(self, i: slice) -> list[Session]: ...

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        r = self._runs
        return Session(str(self._names[r.keys[i]]), int(r.starts[i]), int(r.ends[i]), int(r.counts[i]))

    def __repr__(self) -> str:
        return f"SessionTable(sessions={len(self)})"


class LifetimeTable(Sequence[Lifetime]):
    """File lifetimes ordered by (object, first query time)."""

    def __init__(self, runs: _Runs, object_names: np.ndarray, definition: str):
        self._runs = runs
        self._names = object_names
        self.definition = definition

    @property
    def lengths(self) -> np.ndarray:
        return self._runs.lengths

    @property
    def object_codes(self) -> np.ndarray:
        return self._runs.keys

    def __len__(self) -> int:
        return len(self._runs.starts)

    @overload
    def __getitem__(self, i: int) -> Lifetime: ...
    @overload
    def __getitem__(self, i: slice) -> list[Lifetime]: ...

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        r = self._runs
        return Lifetime(str(self._names[r.keys[i]]), int(r.ends[i] - r.starts[i]), self.definition)

    def __repr__(self) -> str:
        return f"LifetimeTable({self.definition}, lifetimes={len(self)})"


def sessionize(trace: Trace, threshold: GapThreshold | int = DEFAULT_THRESHOLD) -> SessionTable:
    """Split every actor's events into sessions.

    A gap of exactly ``threshold`` seconds stays inside the session.  A lone
    event is a session of length 0.
    """
    theta = _as_threshold(threshold)
    order = trace.actor_order
    runs = _runs(trace.times[order], trace.actors[order], theta)
    return SessionTable(runs, trace.actor_names)


def gap_distribution(trace: Trace, key: str = "actor") -> np.ndarray:
    """Gaps between consecutive events sharing the same actor (or object).

    With ``key="object"``, events without an object are skipped.
    """
    if key == "actor":
        order, codes = trace.actor_order, trace.actors
    elif key == "object":
        order, codes = trace.object_order, trace.objects
    else:
        raise ValueError(f"key must be 'actor' or 'object', got {key!r}")
    t = trace.times[order]
    k = codes[order]
    same = k[1:] == k[:-1]
    return np.diff(t)[same]


def lifetimes_gap(trace: Trace, threshold: GapThreshold | int = DEFAULT_THRESHOLD) -> LifetimeTable:
    """File lifetimes as maximal runs of queries with no gap above threshold."""
    theta = _as_threshold(threshold)
    order = trace.object_order
    runs = _runs(trace.times[order], trace.objects[order], theta)
    return LifetimeTable(runs, trace.object_names, "gap")


def lifetimes_span(trace: Trace) -> LifetimeTable:
    """One lifetime per object: last query time minus first query time."""
    order = trace.object_order
    runs = _runs(trace.times[order], trace.objects[order], None)
    return LifetimeTable(runs, trace.object_names, "span")
