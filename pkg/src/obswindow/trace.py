"""Event traces: data model, ingestion, serialization and window slicing.

A :class:`Trace` is stored column-wise (times, actor codes, object codes,
kind codes) so that traces with tens of millions of events fit in memory
and can be sliced without copying.  Iterating a trace yields :class:`Event`
records decoded on demand.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, TextIO, Union, overload

import numpy as np

logger = logging.getLogger(__name__)

KINDS: tuple[str, ...] = ("query", "login", "logout", "generic")
DEFAULT_KIND = "generic"
FORMATS = ("csv", "ndjson")
CSV_HEADER = ("time", "actor", "object", "kind")

_KIND_CODE = {k: i for i, k in enumerate(KINDS)}
_INT_RE = re.compile(r"[+-]?[0-9]+")

Source = Union[bytes, bytearray, memoryview, BinaryIO]


class IngestError(ValueError):
    """A trace record could not be decoded.

    ``line`` is the 1-based physical line of the offending record and
    ``field`` the name of the offending field, when known.
    """

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class Event:
    """One timestamped action by an actor, optionally about an object."""

    time: int
    actor: str
    object: str | None = None
    kind: str = DEFAULT_KIND

    def __post_init__(self) -> None:
        if isinstance(self.time, bool) or not isinstance(self.time, (int, np.integer)):
            raise TypeError(f"event time must be an integer, got {self.time!r}")
        if self.time < 0:
            raise ValueError(f"event time must be >= 0, got {self.time}")
        if not isinstance(self.actor, str) or not self.actor:
            raise ValueError("event actor must be a non-empty string")
        if self.object == "":
            object.__setattr__(self, "object", None)
        if self.kind not in _KIND_CODE:
            raise ValueError(f"unknown event kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "time", int(self.time))


@dataclass(frozen=True)
class ObservationWindow:
    """Half-open observation interval ``[start, start + length)``."""

    start: int
    length: int

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise ValueError(f"window length must be > 0, got {self.length}")

    @property
    def end(self) -> int:
        return self.start + self.length


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _encode(values: Sequence[str | None]) -> tuple[np.ndarray, np.ndarray]:
    """Map strings (``None`` = missing) to codes into a sorted vocabulary."""
    arr = np.asarray(values, dtype=object)
    codes = np.full(len(arr), -1, dtype=np.int64)
    present = np.fromiter((v is not None for v in arr), dtype=bool, count=len(arr))
    if not present.any():
        return np.empty(0, dtype=object), codes
    vocab, inverse = np.unique(arr[present].astype(str), return_inverse=True)
    codes[present] = inverse
    return vocab.astype(object), codes


class Trace(Sequence[Event]):
    """Time-ordered, immutable sequence of events.

    Build traces with :meth:`from_events`, :func:`ingest` or
    :func:`read_trace`; the constructor takes already-encoded columns.
    ``actor_names`` and ``object_names`` are sorted vocabularies, so code
    order equals identifier order.
    """

    def __init__(
        self,
        times: np.ndarray,
        actors: np.ndarray,
        actor_names: np.ndarray,
        objects: np.ndarray,
        object_names: np.ndarray,
        kinds: np.ndarray,
        *,
        disorder: int = 0,
    ):
        n = len(times)
        if not (len(actors) == len(objects) == len(kinds) == n):
            raise ValueError("trace columns must have equal length")
        self.times = _readonly(np.asarray(times, dtype=np.int64))
        self.actors = _readonly(np.asarray(actors, dtype=np.int64))
        self.objects = _readonly(np.asarray(objects, dtype=np.int64))
        self.kinds = _readonly(np.asarray(kinds, dtype=np.int8))
        self.actor_names = actor_names
        self.object_names = object_names
        # adjacent out-of-order pairs seen in the input before sorting
        self.disorder = int(disorder)
        if n > 1 and np.any(self.times[1:] < self.times[:-1]):
            raise ValueError("trace times must be non-decreasing")

    @classmethod
    def _from_unsorted(
        cls,
        times: np.ndarray,
        actors: np.ndarray,
        actor_names: np.ndarray,
        objects: np.ndarray,
        object_names: np.ndarray,
        kinds: np.ndarray,
    ) -> Trace:
        times = np.asarray(times, dtype=np.int64)
        disorder = int(np.count_nonzero(times[1:] < times[:-1])) if len(times) > 1 else 0
        if disorder:
            order = np.argsort(times, kind="stable")
            times, actors, objects, kinds = times[order], actors[order], objects[order], kinds[order]
        return cls(times, actors, actor_names, objects, object_names, kinds, disorder=disorder)

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> Trace:
        """Build a trace from events in any order (stable sort by time)."""
        events = list(events)
        times = np.fromiter((e.time for e in events), dtype=np.int64, count=len(events))
        actor_names, actors = _encode([e.actor for e in events])
        object_names, objects = _encode([e.object for e in events])
        kinds = np.fromiter((_KIND_CODE[e.kind] for e in events), dtype=np.int8, count=len(events))
        return cls._from_unsorted(times, actors, actor_names, objects, object_names, kinds)

    @classmethod
    def empty(cls) -> Trace:
        z = np.empty(0, dtype=np.int64)
        return cls(z, z, np.empty(0, dtype=object), z, np.empty(0, dtype=object), z.astype(np.int8))

    @property
    def horizon(self) -> int:
        return int(self.times[-1]) if len(self.times) else 0

    @property
    def resorted(self) -> bool:
        return self.disorder > 0

    @property
    def events(self) -> tuple[Event, ...]:
        return tuple(self)

    def __len__(self) -> int:
        return len(self.times)

    def _event(self, i: int) -> Event:
        o = self.objects[i]
        return Event(
            int(self.times[i]),
            str(self.actor_names[self.actors[i]]),
            None if o < 0 else str(self.object_names[o]),
            KINDS[self.kinds[i]],
        )

    @overload
    def __getitem__(self, i: int) -> Event: ...
    @overload
    def __getitem__(self, i: slice) -> Trace: ...

    def __getitem__(self, i):
        if isinstance(i, slice):
            start, stop, step = i.indices(len(self))
            if step != 1:
                raise ValueError("trace slices must be contiguous")
            return self._take(start, stop)
        n = len(self)
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError("trace index out of range")
        return self._event(i)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self._event(i)

    def actor_labels(self) -> np.ndarray:
        """Actor identifier of every event, as an object array."""
        return self.actor_names[self.actors] if len(self) else np.empty(0, dtype=object)

    def object_labels(self) -> np.ndarray:
        """Object identifier of every event (``None`` where absent)."""
        out = np.full(len(self), None, dtype=object)
        has = self.objects >= 0
        if has.any():
            out[has] = self.object_names[self.objects[has]]
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            len(self) == len(other)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.actor_labels(), other.actor_labels())
            and np.array_equal(self.object_labels(), other.object_labels())
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Trace(events={len(self)}, horizon={self.horizon})"

    @cached_property
    def actor_order(self) -> np.ndarray:
        """Permutation grouping events by actor, time order kept within a group."""
        return _readonly(np.argsort(self.actors, kind="stable"))

    @cached_property
    def object_order(self) -> np.ndarray:
        """Like :attr:`actor_order` for events that have an object."""
        idx = np.flatnonzero(self.objects >= 0)
        return _readonly(idx[np.argsort(self.objects[idx], kind="stable")])

    def _take(self, i: int, j: int) -> Trace:
        sub = Trace(
            self.times[i:j],
            self.actors[i:j],
            self.actor_names,
            self.objects[i:j],
            self.object_names,
            self.kinds[i:j],
        )
        # filtering a grouped permutation keeps it grouped, so reuse it
        for name in ("actor_order", "object_order"):
            if name in self.__dict__:
                full = self.__dict__[name]
                keep = full[(full >= i) & (full < j)] - i
                sub.__dict__[name] = _readonly(keep)
        return sub


def slice_trace(trace: Trace, window: ObservationWindow) -> Trace:
    """Events with ``window.start <= time < window.end``, order preserved."""
    i = int(np.searchsorted(trace.times, window.start, side="left"))
    j = int(np.searchsorted(trace.times, window.end, side="left"))
    if i == 0 and j == len(trace):
        return trace
    return trace._take(i, max(i, j))


@dataclass(frozen=True)
class ValidationReport:
    events: int
    actors: int
    objects: int
    horizon: int
    violations: int
    resorted: bool

    def to_dict(self) -> dict[str, int | bool]:
        return {
            "events": self.events,
            "actors": self.actors,
            "objects": self.objects,
            "horizon": self.horizon,
            "violations": self.violations,
            "resorted": self.resorted,
        }


def validate(trace: Trace | Iterable[Event]) -> ValidationReport:
    """Summarize a trace and report time-order violations.

    Raw event sequences are re-sorted (stably) first; ``violations`` counts
    adjacent pairs that were out of order in the input.
    """
    if not isinstance(trace, Trace):
        trace = Trace.from_events(trace)
    return ValidationReport(
        events=len(trace),
        actors=int(np.unique(trace.actors).size),
        objects=int(np.unique(trace.objects[trace.objects >= 0]).size),
        horizon=trace.horizon,
        violations=trace.disorder,
        resorted=trace.resorted,
    )


# -- ingestion ---------------------------------------------------------------


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    return source.read()


def ingest(source: Source, format: str = "csv") -> Trace:  # noqa: A002
    """Decode a CSV or NDJSON byte stream into a time-sorted trace.

    Raises :class:`IngestError` naming the line and field of the first
    malformed record.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown trace format {format!r}; expected one of {FORMATS}")
    data = _read_bytes(source)
    if format == "csv":
        try:
            return _ingest_csv_fast(data)
        except _Fallback as exc:
            logger.debug("fast CSV path declined (%s); using line-by-line parser", exc)
            return _ingest_csv_slow(data)
    return _ingest_ndjson(data)


def read_trace(path: str | os.PathLike, format: str | None = None) -> Trace:  # noqa: A002
    path = Path(path)
    if format is None:
        format = "ndjson" if path.suffix.lower() in (".ndjson", ".jsonl") else "csv"
    with path.open("rb") as fh:
        return ingest(fh, format)


class _Fallback(Exception):
    pass


def _ingest_csv_fast(data: bytes) -> Trace:
    """Columnar parse via pyarrow; declines on anything unusual."""
    import pyarrow as pa
    import pyarrow.compute as pc
    import pyarrow.csv as pcsv

    if not data.strip():
        return Trace.empty()
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    convert = pcsv.ConvertOptions(
        column_types={c: pa.string() for c in CSV_HEADER},
        strings_can_be_null=False,
    )
    try:
        table = pcsv.read_csv(
            io.BytesIO(data),
            read_options=pcsv.ReadOptions(block_size=1 << 24),
            convert_options=convert,
        )
    except (pa.ArrowInvalid, UnicodeDecodeError) as exc:
        raise _Fallback(str(exc)) from None
    names = table.column_names
    if len(set(names)) != len(names) or "time" not in names or "actor" not in names:
        raise _Fallback("header")
    n = table.num_rows
    if n == 0:
        return Trace.empty()

    time_col = table.column("time")
    if not pc.all(pc.match_substring_regex(time_col, r"^[0-9]{1,18}$")).as_py():
        raise _Fallback("time")
    times = pc.cast(time_col, pa.int64()).to_numpy()

    actor_col = table.column("actor")
    if pc.any(pc.equal(actor_col, "")).as_py():
        raise _Fallback("actor")
    actor_names, actors = _dict_codes(actor_col, n)

    if "object" in names:
        obj_col = table.column("object")
        obj_col = pc.if_else(pc.equal(obj_col, ""), pa.scalar(None, pa.string()), obj_col)
        object_names, objects = _dict_codes(obj_col, n)
    else:
        object_names, objects = np.empty(0, dtype=object), np.full(n, -1, dtype=np.int64)

    if "kind" in names:
        kind_col = pc.if_else(pc.equal(table.column("kind"), ""), DEFAULT_KIND, table.column("kind"))
        kinds = pc.index_in(kind_col, value_set=pa.array(KINDS))
        if kinds.null_count:
            raise _Fallback("kind")
        kinds = kinds.to_numpy().astype(np.int8)
    else:
        kinds = np.full(n, _KIND_CODE[DEFAULT_KIND], dtype=np.int8)

    return Trace._from_unsorted(times, actors, actor_names, objects, object_names, kinds)


def _dict_codes(column, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Dictionary-encode an arrow string column into sorted-vocabulary codes."""
    import pyarrow as pa

    array = column.combine_chunks() if column.num_chunks else pa.array([], pa.string())
    encoded = array.dictionary_encode()
    vocab = np.asarray(encoded.dictionary.to_pylist(), dtype=object)
    idx = encoded.indices.to_numpy(zero_copy_only=False)
    codes = np.full(n, -1, dtype=np.int64)
    if encoded.null_count:
        valid = ~np.asarray(encoded.is_null().to_numpy(zero_copy_only=False), dtype=bool)
    else:
        valid = np.ones(n, dtype=bool)
    if len(vocab) == 0:
        return vocab, codes
    order = np.argsort(vocab.astype(str), kind="stable")
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    codes[valid] = rank[idx[valid].astype(np.int64)]
    return vocab[order], codes


def _parse_time(text: object, line: int) -> int:
    if isinstance(text, str):
        s = text.strip()
        if not _INT_RE.fullmatch(s):
            raise IngestError(f"time {text!r} is not an integer", line=line, field="time")
        value = int(s)
    elif isinstance(text, int) and not isinstance(text, bool):
        value = text
    else:
        raise IngestError(f"time {text!r} is not an integer", line=line, field="time")
    if value < 0:
        raise IngestError(f"negative timestamp {value}", line=line, field="time")
    if value >= 2**62:
        raise IngestError(f"timestamp {value} out of range", line=line, field="time")
    return value


def _parse_kind(value: object, line: int) -> int:
    if value is None or value == "":
        return _KIND_CODE[DEFAULT_KIND]
    code = _KIND_CODE.get(value) if isinstance(value, str) else None
    if code is None:
        raise IngestError(f"unknown kind {value!r}; expected one of {KINDS}", line=line, field="kind")
    return code


def _columns_to_trace(times, actors, objects, kinds) -> Trace:
    if not times:
        return Trace.empty()
    actor_names, actor_codes = _encode(actors)
    object_names, object_codes = _encode(objects)
    return Trace._from_unsorted(
        np.asarray(times, dtype=np.int64),
        actor_codes,
        actor_names,
        object_codes,
        object_names,
        np.asarray(kinds, dtype=np.int8),
    )


def _ingest_csv_slow(data: bytes) -> Trace:
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        line = data[: exc.start].count(b"\n") + 1
        raise IngestError("invalid UTF-8", line=line) from None
    reader = csv.reader(io.StringIO(text, newline=""))
    header = None
    times: list[int] = []
    actors: list[str] = []
    objects: list[str | None] = []
    kinds: list[int] = []
    try:
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if header is None:
                header = row
                if len(set(header)) != len(header):
                    raise IngestError("duplicate column in header", line=line)
                for required in ("time", "actor"):
                    if required not in header:
                        raise IngestError(f"header lacks '{required}' column", line=line, field=required)
                col = {name: i for i, name in enumerate(header)}
                continue
            if len(row) != len(header):
                raise IngestError(f"expected {len(header)} fields, got {len(row)}", line=line)
            times.append(_parse_time(row[col["time"]], line))
            actor = row[col["actor"]]
            if not actor:
                raise IngestError("empty actor", line=line, field="actor")
            actors.append(actor)
            obj = row[col["object"]] if "object" in col else ""
            objects.append(obj or None)
            kinds.append(_parse_kind(row[col["kind"]] if "kind" in col else "", line))
    except csv.Error as exc:
        raise IngestError(str(exc), line=reader.line_num) from None
    return _columns_to_trace(times, actors, objects, kinds)


def _ingest_ndjson(data: bytes) -> Trace:
    times: list[int] = []
    actors: list[str] = []
    objects: list[str | None] = []
    kinds: list[int] = []
    for line, raw in enumerate(data.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise IngestError(f"invalid JSON: {exc}", line=line) from None
        if not isinstance(rec, dict):
            raise IngestError("record is not a JSON object", line=line)
        if "time" not in rec:
            raise IngestError("missing key", line=line, field="time")
        t = rec["time"]
        if isinstance(t, str):
            raise IngestError(f"time {t!r} is not an integer", line=line, field="time")
        times.append(_parse_time(t, line))
        actor = rec.get("actor")
        if not isinstance(actor, str) or not actor:
            raise IngestError("actor must be a non-empty string", line=line, field="actor")
        actors.append(actor)
        obj = rec.get("object")
        if obj is not None and not isinstance(obj, str):
            raise IngestError("object must be a string or null", line=line, field="object")
        objects.append(obj or None)
        kinds.append(_parse_kind(rec.get("kind"), line))
    return _columns_to_trace(times, actors, objects, kinds)


# -- serialization -----------------------------------------------------------


def write_csv(trace: Trace, stream: TextIO) -> None:
    """Write ``time,actor,object,kind`` rows; missing objects are empty."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    if not len(trace):
        return
    objects = trace.object_labels()
    objects[objects == None] = ""  # noqa: E711
    kind_names = np.asarray(KINDS, dtype=object)[trace.kinds]
    writer.writerows(
        zip(trace.times.tolist(), trace.actor_labels().tolist(), objects.tolist(), kind_names.tolist())
    )


def write_ndjson(trace: Trace, stream: TextIO) -> None:
    for e in trace:
        rec: dict[str, object] = {"time": e.time, "actor": e.actor}
        if e.object is not None:
            rec["object"] = e.object
        rec["kind"] = e.kind
        stream.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
        stream.write("\n")


def serialize(trace: Trace, format: str = "csv") -> bytes:  # noqa: A002
    buf = io.StringIO(newline="")
    if format == "csv":
        write_csv(trace, buf)
    elif format == "ndjson":
        write_ndjson(trace, buf)
    else:
        raise ValueError(f"unknown trace format {format!r}; expected one of {FORMATS}")
    return buf.getvalue().encode("utf-8")
