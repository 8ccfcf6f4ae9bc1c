"""Synthetic traces with a known session-length law.

Randomness comes from a single PCG64 stream (numpy's ``PCG64`` bit
generator seeded through ``SeedSequence(seed)``). Raw 64-bit outputs are
consumed in pairs. The first value of a pair sets the exponential
inter-arrival gap and the second sets the session length. Both become
uniforms ``u = (x >> 11) * 2**-53`` and are transformed by inverse CDF:

* inter-arrival gap: ``-ln(1 - u) / arrival_rate``
* exponential length: ``-mean * m * ln(1 - u)``
* Pareto length: ``scale * m * (1 - u) ** (-1 / shape)``

where ``m`` is the drift multiplier at the session's arrival time. Session
starts are floored and lengths rounded half-up to integer seconds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .distrib import Ccdf
from .trace import KINDS, Trace

_BLOCK = 1 << 16


@dataclass(frozen=True)
class Exponential:
    mean: float

    def __post_init__(self) -> None:
        if not self.mean > 0:
            raise ValueError(f"exponential mean must be > 0, got {self.mean}")

    def sample(self, u: np.ndarray, multiplier: np.ndarray | float = 1.0) -> np.ndarray:
        return -self.mean * multiplier * np.log1p(-u)

    def survival(self, k: np.ndarray) -> np.ndarray:
        return np.exp(-k / self.mean)

    def to_dict(self) -> dict[str, object]:
        return {"kind": "exponential", "mean": self.mean}


@dataclass(frozen=True)
class Pareto:
    shape: float
    scale: float

    def __post_init__(self) -> None:
        if not self.shape > 1:
            raise ValueError(f"pareto shape must be > 1, got {self.shape}")
        if not self.scale > 0:
            raise ValueError(f"pareto scale must be > 0, got {self.scale}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale / (self.shape - 1)

    def sample(self, u: np.ndarray, multiplier: np.ndarray | float = 1.0) -> np.ndarray:
        return self.scale * multiplier * np.power(1.0 - u, -1.0 / self.shape)

    def survival(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        out = np.ones_like(k)
        above = k > self.scale
        out[above] = (self.scale / k[above]) ** self.shape
        return out

    def to_dict(self) -> dict[str, object]:
        return {"kind": "pareto", "shape": self.shape, "scale": self.scale}


LengthLaw = Union[Exponential, Pareto]


def law_from_dict(d: dict) -> LengthLaw:
    kind = d.get("kind")
    if kind == "exponential":
        return Exponential(float(d["mean"]))
    if kind == "pareto":
        return Pareto(float(d["shape"]), float(d["scale"]))
    raise ValueError(f"unknown length law {kind!r}; expected 'exponential' or 'pareto'")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of a synthetic trace.

    ``drift``, when set, multiplies the law's scale linearly from 1.0 at
    t = 0 up to ``drift`` at ``horizon``.
    """

    horizon: int
    arrival_rate: float
    length_law: LengthLaw
    drift: float | None = None
    intra_session_gap: int = 600
    seed: int = 0

    def __post_init__(self) -> None:
        if not (isinstance(self.horizon, int) and self.horizon > 0):
            raise ValueError(f"horizon must be a positive integer, got {self.horizon!r}")
        if not self.arrival_rate > 0:
            raise ValueError(f"arrival_rate must be > 0, got {self.arrival_rate}")
        if not isinstance(self.length_law, (Exponential, Pareto)):
            raise TypeError("length_law must be Exponential or Pareto")
        if self.drift is not None and not self.drift > 0:
            raise ValueError(f"drift factor must be > 0, got {self.drift}")
        if not (isinstance(self.intra_session_gap, int) and self.intra_session_gap >= 1):
            raise ValueError(f"intra_session_gap must be an integer >= 1, got {self.intra_session_gap!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")

    @property
    def stationary(self) -> bool:
        return self.drift is None or self.drift == 1.0

    def to_dict(self) -> dict[str, object]:
        return {
            "horizon": self.horizon,
            "arrival_rate": self.arrival_rate,
            "length_law": self.length_law.to_dict(),
            "drift": self.drift,
            "intra_session_gap": self.intra_session_gap,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> GeneratorSpec:
        try:
            drift = d.get("drift")
            return cls(
                horizon=_as_int(d["horizon"], "horizon"),
                arrival_rate=float(d["arrival_rate"]),
                length_law=law_from_dict(d["length_law"]),
                drift=None if drift is None else float(drift),
                intra_session_gap=_as_int(d.get("intra_session_gap", 600), "intra_session_gap"),
                seed=_as_int(d.get("seed", 0), "seed"),
            )
        except KeyError as exc:
            raise ValueError(f"generator spec lacks {exc.args[0]!r}") from None
        except TypeError as exc:
            raise ValueError(f"invalid generator spec: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> GeneratorSpec:
        d = json.loads(text)
        if not isinstance(d, dict):
            raise ValueError("generator spec must be a JSON object")
        return cls.from_dict(d)


def _as_int(v: object, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ValueError(f"{name} must be an integer, got {v!r}")
    return int(v)


def _uniforms(bits: np.random.PCG64, n: int) -> np.ndarray:
    raw = np.asarray(bits.random_raw(n), dtype=np.uint64)
    return (raw >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def draw_sessions(spec: GeneratorSpec) -> tuple[np.ndarray, np.ndarray]:
    """Integer start times and lengths of every session, in arrival order."""
    bits = np.random.PCG64(spec.seed)
    starts: list[np.ndarray] = []
    lengths: list[np.ndarray] = []
    t = 0.0
    while True:
        u = _uniforms(bits, 2 * _BLOCK)
        gaps = -np.log1p(-u[0::2]) / spec.arrival_rate
        # sequential accumulation t_i = t_{i-1} + gap_i, carried across blocks
        arrivals = np.cumsum(np.concatenate(([t], gaps)))[1:]
        inside = arrivals < spec.horizon
        k = int(np.count_nonzero(inside))  # arrivals are increasing
        arrivals = arrivals[:k]
        if spec.stationary:
            mult: np.ndarray | float = 1.0
        else:
            mult = 1.0 + (spec.drift - 1.0) * arrivals / spec.horizon
        raw_len = spec.length_law.sample(u[1::2][:k], mult)
        starts.append(np.floor(arrivals).astype(np.int64))
        lengths.append(np.floor(raw_len + 0.5).astype(np.int64))
        if k < _BLOCK:
            break
        t = float(arrivals[-1])
    return np.concatenate(starts), np.concatenate(lengths)


def _actor_names(n: int) -> np.ndarray:
    width = max(1, len(str(n - 1)))
    return np.array([f"s{i:0{width}d}" for i in range(n)], dtype=object)


def sessions_to_trace(starts: np.ndarray, lengths: np.ndarray, gap: int) -> Trace:
    """Emit one query at each session start, every ``gap`` seconds, and at its end.

    Session ``i`` belongs to actor ``s<i>`` (zero-padded, so vocabulary order
    is session order).
    """
    n = len(starts)
    if n == 0:
        return Trace.empty()
    lengths = np.asarray(lengths, dtype=np.int64)
    per_session = np.where(lengths > 0, -(-lengths // gap) + 1, 1)
    total = int(per_session.sum())
    owner = np.repeat(np.arange(n, dtype=np.int64), per_session)
    first = np.cumsum(per_session) - per_session
    step = np.arange(total, dtype=np.int64) - first[owner]
    times = starts[owner] + np.minimum(step * gap, lengths[owner])
    order = np.argsort(times, kind="stable")
    none = np.full(total, -1, dtype=np.int64)
    return Trace(
        times[order],
        owner[order],
        _actor_names(n),
        none,
        np.empty(0, dtype=object),
        np.full(total, KINDS.index("query"), dtype=np.int8),
    )


def generate(spec: GeneratorSpec) -> Trace:
    """Deterministic synthetic trace for ``spec``.

    Every session is emitted in full, so events may extend past
    ``spec.horizon``; only session arrivals are confined to it.
    """
    starts, lengths = draw_sessions(spec)
    return sessions_to_trace(starts, lengths, spec.intra_session_gap)


def ground_truth_ccdf(spec: GeneratorSpec, k_max: int) -> Ccdf:
    """Analytic CCDF of the length law at ticks ``0 .. k_max``."""
    if not spec.stationary:
        raise ValueError("ground truth is only defined for stationary specs (no drift)")
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    k = np.arange(k_max + 1, dtype=np.float64)
    return Ccdf(spec.length_law.survival(k), 0)

