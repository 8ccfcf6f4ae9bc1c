from __future__ import annotations

import time
from contextlib import contextmanager

import pytest
from hypothesis import strategies as st

from obswindow import Event, Trace

ACTORS = ["a", "b", "c", "d", "e"]
OBJECTS = [None, "f1", "f2", "f3"]


@st.composite
def events(draw, max_size: int = 60, max_time: int = 500):
    n = draw(st.integers(0, max_size))
    out = []
    for _ in range(n):
        out.append(
            Event(
                draw(st.integers(0, max_time)),
                draw(st.sampled_from(ACTORS)),
                draw(st.sampled_from(OBJECTS)),
                draw(st.sampled_from(["query", "login", "logout", "generic"])),
            )
        )
    return out


def traces(**kw):
    return events(**kw).map(Trace.from_events)


def random_trace(rng, n: int, max_time: int, n_actors: int = 8, n_objects: int = 5) -> Trace:
    """Random trace from a ``random.Random``; about a third of events lack an object."""
    evs = []
    for _ in range(n):
        obj = rng.randrange(n_objects + n_objects // 2)
        evs.append(
            Event(
                rng.randrange(max_time + 1),
                f"u{rng.randrange(n_actors)}",
                f"f{obj}" if obj < n_objects else None,
                "query",
            )
        )
    return Trace.from_events(evs)


# -- acceptance reporting --------------------------------------------------

_RESULTS: list[tuple[str, bool, float, str]] = []


@pytest.fixture
def criterion():
    @contextmanager
    def record(name: str, budget_s: float | None = None):
        t0 = time.perf_counter()
        detail = {"text": ""}
        try:
            yield detail
        except BaseException:
            _RESULTS.append((name, False, time.perf_counter() - t0, detail["text"]))
            raise
        elapsed = time.perf_counter() - t0
        ok = budget_s is None or elapsed < budget_s
        _RESULTS.append((name, ok, elapsed, detail["text"]))
        assert ok, f"{name}: took {elapsed:.1f} s, budget {budget_s} s"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, elapsed, text in _RESULTS:
        status = "PASS" if ok else "FAIL"
        extra = f"  [{text}]" if text else ""
        terminalreporter.write_line(f"{status}  {name}  ({elapsed:.2f} s){extra}")
