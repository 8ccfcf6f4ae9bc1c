import random
from collections import Counter, defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obswindow import Event, GapThreshold, Session, Trace, gap_distribution, lifetimes_gap, lifetimes_span, sessionize

from conftest import random_trace, traces


def oracle_runs(trace, theta, key="actor"):
    """All-pairs oracle: an event starts a new run iff its nearest earlier
    same-key event is more than ``theta`` seconds back (or absent)."""
    evs = list(trace)
    label = (lambda e: e.actor) if key == "actor" else (lambda e: e.object)
    runs = defaultdict(list)  # key -> list of [start, end, count]
    for i, e in enumerate(evs):
        k = label(e)
        if k is None:
            continue
        prev = None
        for j in range(i):
            if label(evs[j]) == k:
                prev = evs[j].time  # last match wins: latest in time order
        if prev is None or (theta is not None and e.time - prev > theta):
            runs[k].append([e.time, e.time, 1])
        else:
            runs[k][-1][1] = e.time
            runs[k][-1][2] += 1
    return [(k, s, t, c) for k in sorted(runs) for s, t, c in runs[k]]


def as_tuples(table):
    return [(s.actor, s.start, s.end, s.events) for s in table]


class TestSessionize:
    def test_paper_threshold_example(self):
        t = Trace.from_events([Event(x, "u") for x in (0, 100, 4000, 20000)])
        s = sessionize(t, 10_800)
        assert [(x.start, x.end, x.length) for x in s] == [(0, 4000, 4000), (20000, 20000, 0)]

    def test_isolated_event(self):
        s = sessionize(Trace.from_events([Event(7, "u")]), 10_800)
        assert len(s) == 1 and s[0].length == 0

    def test_interleaved_actors(self):
        t = Trace.from_events([Event(0, "a"), Event(10, "b"), Event(50, "a"), Event(60, "b")])
        assert [(x.actor, x.length) for x in sessionize(t, 10_800)] == [("a", 50), ("b", 50)]

    def test_gap_equal_to_threshold_stays(self):
        t = Trace.from_events([Event(0, "a"), Event(100, "a"), Event(201, "a")])
        assert [x.length for x in sessionize(t, 100)] == [100, 0]

    def test_default_threshold(self):
        t = Trace.from_events([Event(0, "a"), Event(10_800, "a"), Event(21_601, "a")])
        assert len(sessionize(t)) == 2

    def test_empty(self):
        assert len(sessionize(Trace.empty(), 5)) == 0

    def test_output_order(self):
        t = Trace.from_events([Event(0, "b"), Event(1, "a"), Event(500, "a"), Event(900, "b")])
        assert [(x.actor, x.start) for x in sessionize(t, 10)] == [("a", 1), ("a", 500), ("b", 0), ("b", 900)]

    def test_table_columns_match_records(self):
        t = random_trace(random.Random(3), 200, 5000)
        s = sessionize(t, 300)
        assert s.lengths.tolist() == [x.length for x in s]
        assert s[1:3] == [s[1], s[2]]

    @pytest.mark.parametrize("bad", [0, -5])
    def test_threshold_positive(self, bad):
        with pytest.raises(ValueError):
            GapThreshold(bad)

    def test_session_invariant(self):
        with pytest.raises(ValueError):
            Session("a", 5, 4)

    def test_oracle_equivalence_random(self):
        rng = random.Random(20240601)
        for _ in range(100):
            t = random_trace(rng, rng.randrange(0, 200), rng.randrange(1, 3000))
            theta = rng.randrange(1, 400)
            assert as_tuples(sessionize(t, theta)) == oracle_runs(t, theta)

    @settings(max_examples=100, deadline=None)
    @given(traces(), st.integers(1, 200))
    def test_sessions_disjoint_and_separated(self, trace, theta):
        by_actor = defaultdict(list)
        for s in sessionize(trace, theta):
            by_actor[s.actor].append(s)
        for runs in by_actor.values():
            for a, b in zip(runs, runs[1:]):
                assert b.start - a.end > theta

    @settings(max_examples=100, deadline=None)
    @given(traces(), st.integers(1, 200))
    def test_no_event_lost(self, trace, theta):
        counts = Counter()
        for s in sessionize(trace, theta):
            counts[s.actor] += s.events
        assert counts == Counter(e.actor for e in trace)

    @settings(max_examples=50, deadline=None)
    @given(traces())
    def test_threshold_at_horizon_one_session_per_actor(self, trace):
        s = sessionize(trace, max(trace.horizon, 1))
        assert len(s) == len({e.actor for e in trace})

    def test_unit_threshold_splits_everything(self):
        t = Trace.from_events([Event(x, "a") for x in (0, 2, 5, 9, 20)])
        assert len(sessionize(t, 1)) == 5


class TestGapDistribution:
    def test_pairwise_differences(self):
        t = Trace.from_events([Event(x, "a") for x in (0, 100, 4000)])
        assert sorted(gap_distribution(t, "actor").tolist()) == [100, 3900]

    def test_distinct_actors(self):
        t = Trace.from_events([Event(i, f"a{i}") for i in range(5)])
        assert gap_distribution(t).size == 0

    def test_object_key_without_objects(self):
        t = Trace.from_events([Event(i, "a") for i in range(5)])
        assert gap_distribution(t, "object").size == 0

    def test_object_key_skips_missing(self):
        t = Trace.from_events([Event(0, "a", "f"), Event(3, "b"), Event(10, "c", "f")])
        assert gap_distribution(t, "object").tolist() == [10]

    def test_bad_key(self):
        with pytest.raises(ValueError):
            gap_distribution(Trace.empty(), "kind")

    @settings(max_examples=60, deadline=None)
    @given(traces(), st.sampled_from(["actor", "object"]))
    def test_matches_brute_force(self, trace, key):
        groups = defaultdict(list)
        for e in trace:
            k = e.actor if key == "actor" else e.object
            if k is not None:
                groups[k].append(e.time)
        expected = sorted(b - a for ts in groups.values() for a, b in zip(ts, ts[1:]))
        assert sorted(gap_distribution(trace, key).tolist()) == expected


class TestLifetimes:
    def file_trace(self, ts, obj="f"):
        return Trace.from_events([Event(x, f"u{i}", obj) for i, x in enumerate(ts)])

    def test_gap_split(self):
        lt = lifetimes_gap(self.file_trace([10, 50, 99_999]), 10_800)
        assert sorted(x.length for x in lt) == [0, 40]
        assert {x.definition for x in lt} == {"gap"}

    def test_gap_single(self):
        assert [x.length for x in lifetimes_gap(self.file_trace([5]), 10_800)] == [0]

    def test_gap_joined(self):
        assert [x.length for x in lifetimes_gap(self.file_trace([0, 10_000, 20_000]), 10_800)] == [20_000]

    def test_span(self):
        lt = lifetimes_span(self.file_trace([10, 50, 99_999]))
        assert [(x.object, x.length, x.definition) for x in lt] == [("f", 99_989, "span")]

    def test_span_single(self):
        assert [x.length for x in lifetimes_span(self.file_trace([42]))] == [0]

    def test_span_two_objects(self):
        t = Trace.from_events(
            [Event(0, "a", "x"), Event(5, "a", "y"), Event(7, "b", "x"), Event(30, "c", "y"), Event(31, "d")]
        )
        assert [(x.object, x.length) for x in lifetimes_span(t)] == [("x", 7), ("y", 25)]

    def test_events_without_object_ignored(self):
        t = Trace.from_events([Event(0, "a"), Event(5, "b")])
        assert len(lifetimes_gap(t, 10)) == 0 and len(lifetimes_span(t)) == 0

    def test_gap_oracle_equivalence(self):
        rng = random.Random(77)
        for _ in range(60):
            t = random_trace(rng, rng.randrange(0, 150), rng.randrange(1, 2000))
            theta = rng.randrange(1, 300)
            got = [(str(t.object_names[k]), l) for k, l in zip(lifetimes_gap(t, theta).object_codes, lifetimes_gap(t, theta).lengths)]
            want = [(k, e - s) for k, s, e, _ in oracle_runs(t, theta, key="object")]
            assert got == want

    @settings(max_examples=80, deadline=None)
    @given(traces())
    def test_gap_equals_span_at_large_threshold(self, trace):
        theta = max(trace.horizon, 1)
        gap = [(x.object, x.length) for x in lifetimes_gap(trace, theta)]
        span = [(x.object, x.length) for x in lifetimes_span(trace)]
        assert gap == span


def test_lengths_are_int64():
    t = Trace.from_events([Event(0, "a"), Event(9, "a")])
    assert sessionize(t, 10).lengths.dtype == np.int64
