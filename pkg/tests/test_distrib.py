import io
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obswindow import Ccdf, ccdf, mk_distance, moments, trim_extremes
from obswindow.distrib import read_ccdf_csv, write_ccdf_csv


def brute_mk(xs, ys):
    """Per-tick MK straight from the raw samples, in exact arithmetic."""
    k_max = max(max(xs), max(ys))
    if k_max == 0:
        return Fraction(0)
    total = Fraction(0)
    for k in range(k_max + 1):
        p = Fraction(sum(1 for x in xs if x >= k), len(xs))
        q = Fraction(sum(1 for y in ys if y >= k), len(ys))
        total += abs(p - q)
    return total / k_max


durations = st.lists(st.integers(0, 200), min_size=1, max_size=60)


class TestCcdf:
    def test_hand_example(self):
        c = ccdf([2, 5, 5, 9])
        assert c.k_max == 9
        assert c.count == 4
        expected = [1, 1, 1, 0.75, 0.75, 0.75, 0.25, 0.25, 0.25, 0.25]
        assert c.values.tolist() == expected

    def test_single_zero(self):
        c = ccdf([0])
        assert c.k_max == 0 and c.values.tolist() == [1.0]

    def test_constant(self):
        c = ccdf([7, 7, 7])
        assert c.k_max == 7 and c.values.tolist() == [1.0] * 8

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ccdf([])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ccdf([3, -1])

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            ccdf([1.5])

    def test_lookup_beyond_support(self):
        c = ccdf([2, 5, 5, 9])
        assert c[4] == 0.75 and c[100] == 0.0

    @settings(max_examples=100)
    @given(durations)
    def test_invariants(self, d):
        c = ccdf(d)
        v = c.values
        assert v[0] == 1.0
        assert np.all(np.diff(v) <= 0)
        assert v[-1] > 0
        assert c.k_max == max(d)

    @settings(max_examples=50)
    @given(durations, st.integers(2, 7))
    def test_scaling_preserves_distinct_values(self, d, c):
        a = ccdf(d)
        b = ccdf([c * x for x in d])
        assert b.k_max == c * a.k_max
        assert set(a.values.tolist()) == set(b.values.tolist())

    def test_csv_round_trip(self):
        c = ccdf([1, 3, 3, 10, 11])
        buf = io.StringIO()
        write_ccdf_csv(c, buf)
        text = buf.getvalue()
        assert text.splitlines()[:3] == ["k,p", "0,1.0", "1,1.0"]
        back = read_ccdf_csv(io.StringIO(text), count=c.count)
        assert back == c

    def test_csv_keeps_full_precision(self):
        c = ccdf([0, 1, 1])
        buf = io.StringIO()
        write_ccdf_csv(c, buf)
        assert buf.getvalue().splitlines()[2] == f"1,{2 / 3!r}"
        assert len(repr(2 / 3)) - 2 >= 10


class TestMkDistance:
    def test_hand_example(self):
        p, q = ccdf([2, 5, 5, 9]), ccdf([2, 9])
        assert brute_mk([2, 5, 5, 9], [2, 9]) == Fraction(7, 36)
        assert mk_distance(p, q) == pytest.approx(7 / 36, abs=1e-12)

    def test_identity(self):
        p = ccdf([3, 1, 4, 1, 5])
        assert mk_distance(p, p) == 0.0

    def test_degenerate_support(self):
        assert mk_distance(ccdf([0]), ccdf([0, 0])) == 0.0

    def test_zero_extension(self):
        # [0] vs [4]: P = (1,0,0,0,0), Q = (1,1,1,1,1) -> 4 / 4
        assert mk_distance(ccdf([0]), ccdf([4])) == 1.0

    @settings(max_examples=100)
    @given(durations, durations)
    def test_matches_brute_force(self, xs, ys):
        assert mk_distance(ccdf(xs), ccdf(ys)) == pytest.approx(float(brute_mk(xs, ys)), abs=1e-12)

    @settings(max_examples=100)
    @given(durations, durations)
    def test_symmetric_and_bounded(self, xs, ys):
        p, q = ccdf(xs), ccdf(ys)
        d = mk_distance(p, q)
        assert d == pytest.approx(mk_distance(q, p), abs=1e-12)
        k = max(p.k_max, q.k_max)
        assert 0 <= d <= (k + 1) / k if k else d == 0

    @settings(max_examples=100)
    @given(durations, durations)
    def test_zero_iff_equal_on_support(self, xs, ys):
        p, q = ccdf(xs), ccdf(ys)
        k = max(p.k_max, q.k_max)
        same = np.array_equal(p.extended(k), q.extended(k))
        assert (mk_distance(p, q) == 0) == same

    def test_triangle_inequality_common_support(self):
        rng = random.Random(5)
        for _ in range(200):
            k = rng.randrange(1, 50)
            # every sample contains k so all three share k_max
            a, b, c = ([rng.randrange(k + 1) for _ in range(rng.randrange(1, 30))] + [k] for _ in range(3))
            p, q, r = ccdf(a), ccdf(b), ccdf(c)
            assert mk_distance(p, r) <= mk_distance(p, q) + mk_distance(q, r) + 1e-12

    def test_analytic_ccdf(self):
        truth = Ccdf(np.exp(-np.arange(11) / 3.0), 0)
        assert truth.k_max == 10
        assert mk_distance(truth, truth) == 0.0


class TestMoments:
    def test_hand_example(self):
        m = moments([2, 5, 5, 9])
        assert m.mean == 5.25
        assert m.std**2 == pytest.approx(6.1875, abs=1e-12)
        assert m.std == pytest.approx(2.48747, abs=1e-5)
        assert m.count == 4

    @pytest.mark.parametrize("d, mean", [([4], 4.0), ([3, 3, 3], 3.0)])
    def test_zero_spread(self, d, mean):
        m = moments(d)
        assert (m.mean, m.std) == (mean, 0.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            moments([])

    @settings(max_examples=100)
    @given(durations)
    def test_tail_sum_identity(self, d):
        assert ccdf(d).tail_mean() == pytest.approx(moments(d).mean, abs=1e-9)

    @settings(max_examples=100)
    @given(durations)
    def test_population_std(self, d):
        mu = sum(d) / len(d)
        assert moments(d).std == pytest.approx(math.sqrt(sum((x - mu) ** 2 for x in d) / len(d)), abs=1e-9)


class TestTrimExtremes:
    def test_half(self):
        assert trim_extremes([1, 2, 3, 4], 0.5).tolist() == [1, 2]

    def test_identity(self):
        assert trim_extremes([4, 1, 3], 1.0).tolist() == [1, 3, 4]

    def test_ties(self):
        assert trim_extremes([5, 5, 5, 9], 0.75).tolist() == [5, 5, 5]

    def test_float_noise(self):
        assert len(trim_extremes(list(range(30)), 0.1)) == 3

    @pytest.mark.parametrize("q", [0, -0.1, 1.01])
    def test_quantile_range(self, q):
        with pytest.raises(ValueError):
            trim_extremes([1, 2], q)

    @settings(max_examples=100)
    @given(durations, st.floats(0.01, 1.0))
    def test_keeps_smallest(self, d, q):
        kept = trim_extremes(d, q)
        assert kept.tolist() == sorted(d)[: len(kept)]
        assert len(kept) == math.ceil(round(q * len(d), 9))
