"""Command-line interface: ``obswindow {validate,analyze,synth}``.

Exit codes
----------
0  success (``analyze``: characterized)
1  input rejected or repaired (malformed record, unsorted trace)
2  usage or configuration error (missing file, bad schedule, bad spec)
3  ``analyze``: not characterized
4  ``analyze``: nothing to characterize (empty property)
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import engine, synth
from .distrib import write_ccdf_csv
from .sessions import DEFAULT_THRESHOLD
from .trace import FORMATS, IngestError, read_trace, serialize, validate

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_NOT_CHARACTERIZED = 3
EXIT_EMPTY = 4

DEFAULT_LMIN = 3600
DEFAULT_FACTOR = 2.0


class ConfigError(Exception):
    pass


def atomic_write(path: Path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _err(msg: str) -> None:
    print(f"obswindow: {msg}", file=sys.stderr)


@dataclass
class AnalysisConfig:
    input: Path
    format: str | None = None
    property: str = "sessions"
    threshold: int = DEFAULT_THRESHOLD
    gap_key: str = "actor"
    schedule: tuple[int, ...] | None = None
    l_min: int | None = None
    l_max: int | None = None
    factor: float = DEFAULT_FACTOR
    epsilon: float = engine.DEFAULT_EPSILON
    delta: float = engine.DEFAULT_DELTA
    tail_fraction: float = engine.DEFAULT_TAIL_FRACTION
    trim: float | None = None
    out: Path = Path(".")
    workers: int = 1

    def window_schedule(self, horizon: int) -> engine.WindowSchedule:
        if self.schedule is not None:
            return engine.WindowSchedule(self.schedule)
        l_max = horizon if self.l_max is None else self.l_max
        l_min = DEFAULT_LMIN if self.l_min is None else self.l_min
        if self.l_min is None and l_min >= l_max:
            raise engine.ScheduleError(
                f"trace horizon {l_max} s is too short for the default l_min of {l_min} s; pass --lmin"
            )
        return engine.schedule_geometric(l_min, l_max, self.factor)

    def extractor(self) -> engine.Extractor:
        return engine.Extractor(self.property, self.threshold, self.gap_key)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obswindow",
        description="Decide whether an observation window is long enough to characterize a duration distribution.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a trace file and print a JSON report")
    p.add_argument("--input", "-i", required=True, type=Path)
    p.add_argument("--format", choices=FORMATS)

    p = sub.add_parser("analyze", help="build the convergence curve and verdict")
    p.add_argument("--input", "-i", required=True, type=Path)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--property", choices=engine.PROPERTIES, default="sessions")
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD, help="gap threshold in seconds (default: %(default)s)")
    p.add_argument("--gap-key", choices=("actor", "object"), default="actor", help="grouping key for --property gaps")
    p.add_argument("--schedule", type=_int_list, help="explicit window lengths, e.g. 3600,7200,86400")
    p.add_argument("--lmin", type=int, help=f"shortest window for a geometric schedule (default: {DEFAULT_LMIN})")
    p.add_argument("--lmax", type=int, help="longest window (default: trace horizon)")
    p.add_argument("--factor", type=float, default=DEFAULT_FACTOR)
    p.add_argument("--epsilon", type=float, default=engine.DEFAULT_EPSILON)
    p.add_argument("--delta", type=float, default=engine.DEFAULT_DELTA)
    p.add_argument("--tail-fraction", type=float, default=engine.DEFAULT_TAIL_FRACTION)
    p.add_argument("--trim", type=float, help="keep only this lower quantile of each window's durations")
    p.add_argument("--out", "-o", type=Path, default=Path("."))
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("synth", help="generate a synthetic trace from a JSON spec")
    p.add_argument("spec", type=Path)
    p.add_argument("--out", "-o", type=Path, default=Path("."))
    p.add_argument("--format", choices=FORMATS, default="csv")
    return parser


def _load(path: Path, fmt: str | None):
    if not path.is_file():
        raise ConfigError(f"no such file: {path}")
    return read_trace(path, fmt)


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        trace = _load(args.input, args.format)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except IngestError as exc:
        _err(f"{args.input}: {exc}")
        return EXIT_INPUT
    report = validate(trace)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_INPUT if report.resorted else EXIT_OK


def run_analysis(config: AnalysisConfig) -> int:
    try:
        trace = _load(config.input, config.format)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except IngestError as exc:
        _err(f"{config.input}: {exc}")
        return EXIT_INPUT
    try:
        extractor = config.extractor()
        schedule = config.window_schedule(trace.horizon)
        if len(schedule) < 3:
            raise engine.ScheduleError("convergence detection needs at least 3 windows")
        if not (config.epsilon > 0 and config.delta > 0 and 0 < config.tail_fraction < 1):
            raise ValueError("need epsilon > 0, delta > 0 and 0 < tail-fraction < 1")
        curve = engine.analyze(trace, extractor, schedule, config.trim, workers=config.workers)
    except engine.EmptyPropertyError as exc:
        _err(str(exc))
        return EXIT_EMPTY
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        verdict = engine.detect(curve, config.epsilon, config.delta, config.tail_fraction)
    except engine.AnalysisError as exc:
        _err(str(exc))
        return EXIT_EMPTY

    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    curve.to_csv(buf)
    atomic_write(out / "curve.csv", buf.getvalue())
    for point, dist in zip(curve.points, curve.ccdfs):
        if dist is None:
            continue
        buf = io.StringIO()
        write_ccdf_csv(dist, buf)
        atomic_write(out / f"ccdf_{point.length}.csv", buf.getvalue())
    atomic_write(out / "verdict.json", verdict.to_json())

    for length in curve.undefined_lengths:
        _err(f"warning: no observations in window of {length} s")
    print(verdict.describe())
    return EXIT_OK if verdict.characterized else EXIT_NOT_CHARACTERIZED


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.schedule is not None and (args.lmin is not None or args.lmax is not None):
        _err("--schedule cannot be combined with --lmin/--lmax")
        return EXIT_CONFIG
    config = AnalysisConfig(
        input=args.input,
        format=args.format,
        property=args.property,
        threshold=args.threshold,
        gap_key=args.gap_key,
        schedule=args.schedule,
        l_min=args.lmin,
        l_max=args.lmax,
        factor=args.factor,
        epsilon=args.epsilon,
        delta=args.delta,
        tail_fraction=args.tail_fraction,
        trim=args.trim,
        out=args.out,
        workers=args.workers,
    )
    return run_analysis(config)


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec = synth.GeneratorSpec.from_json(args.spec.read_text())
    except FileNotFoundError:
        _err(f"no such file: {args.spec}")
        return EXIT_CONFIG
    except (ValueError, TypeError) as exc:
        _err(f"invalid generator spec {args.spec}: {exc}")
        return EXIT_CONFIG
    starts, lengths = synth.draw_sessions(spec)
    trace = synth.sessions_to_trace(starts, lengths, spec.intra_session_gap)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"trace.{args.format}"
    atomic_write(trace_path, serialize(trace, args.format))
    print(f"wrote {trace_path} ({len(trace)} events, {len(starts)} sessions)")
    if spec.stationary:
        k_max = int(lengths.max()) if len(lengths) else 0
        buf = io.StringIO()
        write_ccdf_csv(synth.ground_truth_ccdf(spec, k_max), buf)
        atomic_write(out / "ground_truth.csv", buf.getvalue())
        print(f"wrote {out / 'ground_truth.csv'}")
    else:
        print("spec has drift: no ground truth written (only defined for stationary laws)")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "analyze": cmd_analyze, "synth": cmd_synth}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
