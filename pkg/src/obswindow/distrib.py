"""Discrete complementary cumulative distributions and their comparison.

Durations are integer seconds and distributions are evaluated on every
1-second tick, without binning.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import TextIO

import numpy as np


def _durations(durations: Iterable[int] | np.ndarray, what: str = "durations") -> np.ndarray:
    d = np.asarray(durations if isinstance(durations, np.ndarray) else list(durations))
    if d.size == 0:
        raise ValueError(f"{what} must be non-empty")
    if d.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    if not np.issubdtype(d.dtype, np.integer):
        if not np.all(np.equal(np.mod(d, 1), 0)):
            raise ValueError(f"{what} must be integer seconds")
        d = d.astype(np.int64)
    if d.min() < 0:
        raise ValueError(f"{what} must be >= 0")
    return d.astype(np.int64, copy=False)


@dataclass(frozen=True, eq=False)
class Ccdf:
    """Fraction of observations ``>= k`` for ``k = 0 .. k_max``.

    ``count`` is the number of underlying observations; analytic
    distributions carry ``count = 0``.
    """

    values: np.ndarray
    count: int

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("ccdf values must be a non-empty 1-D sequence")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def k_max(self) -> int:
        return len(self.values) - 1

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> float:
        """``P_k``; ticks beyond ``k_max`` are 0."""
        if k < 0:
            raise IndexError("tick must be >= 0")
        return float(self.values[k]) if k <= self.k_max else 0.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ccdf):
            return NotImplemented
        return self.count == other.count and np.array_equal(self.values, other.values)

    def tail_mean(self) -> float:
        """Mean recovered from the tail-sum identity ``sum_{k>=1} P_k``."""
        return math.fsum(self.values[1:].tolist())

    def extended(self, k_max: int) -> np.ndarray:
        """Values padded with zeros up to ``k_max``."""
        if k_max < self.k_max:
            raise ValueError("cannot shrink a ccdf")
        out = np.zeros(k_max + 1, dtype=np.float64)
        out[: len(self.values)] = self.values
        return out


def ccdf(durations: Iterable[int] | np.ndarray) -> Ccdf:
    """Empirical CCDF ``P_k = |{d : d >= k}| / n`` for ``k = 0 .. max(d)``."""
    d = _durations(durations)
    hist = np.bincount(d)
    survivors = np.cumsum(hist[::-1])[::-1]
    return Ccdf(survivors / d.size, int(d.size))


def mk_distance(p: Ccdf, q: Ccdf) -> float:
    """Monge-Kantorovich distance between two CCDFs.

    Both are extended with zeros to the larger support ``K`` and the summed
    absolute per-tick difference is divided by ``K``.  Returns 0 when both
    supports are the single tick 0.
    """
    k = max(p.k_max, q.k_max)
    if k == 0:
        return 0.0
    total = np.abs(p.extended(k) - q.extended(k)).sum()
    return float(total / k)


@dataclass(frozen=True)
class Moments:
    mean: float
    std: float
    count: int


def moments(durations: Iterable[int] | np.ndarray) -> Moments:
    """Arithmetic mean and population standard deviation."""
    d = _durations(durations)
    mean = float(d.mean())
    std = float(np.sqrt(np.mean((d - mean) ** 2)))
    return Moments(mean, std, int(d.size))


def _keep_count(quantile: float, n: int) -> int:
    # round away float noise so 0.1 * 30 keeps 3, not 4
    return max(1, math.ceil(round(quantile * n, 9)))


def trim_extremes(durations: Iterable[int] | np.ndarray, quantile: float) -> np.ndarray:
    """Keep the smallest ``ceil(quantile * n)`` values, dropping the upper tail.

    The result is sorted ascending.
    """
    if not 0 < quantile <= 1:
        raise ValueError(f"quantile must be in (0, 1], got {quantile}")
    d = _durations(durations)
    keep = _keep_count(quantile, d.size)
    if keep >= d.size:
        return np.sort(d, kind="stable")
    return np.sort(np.partition(d, keep - 1)[:keep], kind="stable")


def format_float(x: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(x))


def write_ccdf_csv(dist: Ccdf, stream: TextIO) -> None:
    """Write ``k,p`` rows for plotting."""
    stream.write("k,p\n")
    stream.writelines(f"{k},{p!r}\n" for k, p in enumerate(dist.values.tolist()))


def read_ccdf_csv(stream: TextIO, count: int = 0) -> Ccdf:
    header = stream.readline().strip()
    if header != "k,p":
        raise ValueError(f"expected 'k,p' header, got {header!r}")
    values = []
    for expected, line in enumerate(stream):
        k, p = line.strip().split(",")
        if int(k) != expected:
            raise ValueError(f"ticks must be consecutive from 0; got {k} at row {expected}")
        values.append(float(p))
    return Ccdf(np.asarray(values), count)
