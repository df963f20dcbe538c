"""Frame-record parsing, serialization and trace validation.

A trace is line-delimited JSON, one frame per line::

    {"t": 0.033, "face": true, "ear": 0.24}
    {"t": 0.066, "face": true, "landmarks": [[x0, y0], ..., [x67, y67]]}
    {"t": 0.1, "face": false}

``t`` is seconds, ``face`` is required, and a face-present record carries
exactly one of ``landmarks`` (68 pairs) or ``ear``. Unknown keys are
rejected. Eye-only traces may also be written as CSV with the header
``t,face,ear`` where ``face`` is 0 or 1 and ``ear`` is empty when 0.
"""

from __future__ import annotations

import io
import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

from .errors import ParseError, SchemaError
from .geometry import FaceLandmarks68, Point2

CSV_HEADER = "t,face,ear"
_KNOWN_KEYS = frozenset({"t", "face", "landmarks", "ear"})
GAP_FACTOR = 10.0


@dataclass(frozen=True)
class FrameObservation:
    """One timestamped frame: a face with landmarks or an EAR, or no face."""

    timestamp: float
    face_present: bool
    landmarks: FaceLandmarks68 | None = None
    precomputed_ear: float | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"timestamp must be finite and nonnegative, got {self.timestamp!r}")
        if self.face_present:
            if (self.landmarks is None) == (self.precomputed_ear is None):
                raise ValueError("a face frame needs exactly one of landmarks or precomputed_ear")
            if self.precomputed_ear is not None and not (
                math.isfinite(self.precomputed_ear) and self.precomputed_ear >= 0
            ):
                raise ValueError(f"ear must be finite and nonnegative, got {self.precomputed_ear!r}")
        elif self.landmarks is not None or self.precomputed_ear is not None:
            raise ValueError("a no-face frame carries neither landmarks nor ear")

    @classmethod
    def with_ear(cls, t: float, ear: float) -> "FrameObservation":
        return cls(t, True, precomputed_ear=ear)

    @classmethod
    def no_face(cls, t: float) -> "FrameObservation":
        return cls(t, False)


@dataclass
class Trace:
    frames: list[FrameObservation]
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[FrameObservation]:
        return iter(self.frames)


# -- parsing -----------------------------------------------------------------


def _number(value: object, path: str, *, nonnegative: bool = False) -> float:
    # bool is an int subclass; JSON true/false are not numbers here.
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {type(value).__name__}", field=path)
    try:
        out = float(value)
    except OverflowError:
        raise SchemaError("number out of range", field=path) from None
    if not math.isfinite(out):
        raise SchemaError("number must be finite", field=path)
    if nonnegative and out < 0:
        raise SchemaError("must be nonnegative", field=path)
    return out


def _landmarks(value: object) -> FaceLandmarks68:
    if not isinstance(value, list):
        raise SchemaError("expected an array of 68 [x, y] pairs", field="landmarks")
    if len(value) != 68:
        raise SchemaError(f"expected 68 points, got {len(value)}", field="landmarks")
    points = []
    for i, pair in enumerate(value):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError("expected an [x, y] pair", field=f"landmarks[{i}]")
        x = _number(pair[0], f"landmarks[{i}][0]")
        y = _number(pair[1], f"landmarks[{i}][1]")
        points.append(Point2(x, y))
    return FaceLandmarks68(tuple(points))


def observation_from_dict(obj: object) -> FrameObservation:
    """Validate a decoded record against the frame-record schema."""
    if not isinstance(obj, dict):
        raise SchemaError(f"record must be an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - _KNOWN_KEYS)
    if unknown:
        raise SchemaError("unknown field", field=unknown[0])
    if "t" not in obj:
        raise SchemaError("missing required field", field="t")
    if "face" not in obj:
        raise SchemaError("missing required field", field="face")
    t = _number(obj["t"], "t", nonnegative=True)
    face = obj["face"]
    if not isinstance(face, bool):
        raise SchemaError("expected a boolean", field="face")
    has_lm, has_ear = "landmarks" in obj, "ear" in obj
    if not face:
        if has_lm or has_ear:
            raise SchemaError("not allowed when face is false", field="landmarks" if has_lm else "ear")
        return FrameObservation(t, False)
    if has_lm == has_ear:
        raise SchemaError("exactly one of landmarks or ear is required when face is true")
    if has_ear:
        return FrameObservation(t, True, precomputed_ear=_number(obj["ear"], "ear", nonnegative=True))
    return FrameObservation(t, True, landmarks=_landmarks(obj["landmarks"]))


def parse_frame_record(line: str | bytes, line_number: int | None = None) -> FrameObservation:
    """Parse one JSON frame record.

    Raises:
        ParseError: the line is not valid UTF-8 JSON.
        SchemaError: the JSON value violates the record schema.
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc.reason}", line=line_number) from None
    try:
        obj = json.loads(line)
    except RecursionError:
        raise ParseError("nesting too deep", line=line_number) from None
    except ValueError as exc:
        raise ParseError(str(exc), line=line_number) from None
    try:
        return observation_from_dict(obj)
    except SchemaError as exc:
        raise exc.at_line(line_number) if line_number is not None else exc


def parse_csv_record(line: str, line_number: int | None = None) -> FrameObservation:
    cells = line.split(",")
    if len(cells) != 3:
        raise ParseError(f"expected 3 CSV columns, got {len(cells)}", line=line_number)
    t_txt, face_txt, ear_txt = (c.strip() for c in cells)
    try:
        t = float(t_txt)
    except ValueError:
        raise ParseError(f"bad number {t_txt!r}", line=line_number, field="t") from None
    try:
        if not math.isfinite(t) or t < 0:
            raise SchemaError("must be finite and nonnegative", field="t")
        if face_txt not in ("0", "1"):
            raise SchemaError(f"expected 0 or 1, got {face_txt!r}", field="face")
        if face_txt == "0":
            if ear_txt:
                raise SchemaError("must be empty when face is 0", field="ear")
            return FrameObservation(t, False)
        if not ear_txt:
            raise SchemaError("required when face is 1", field="ear")
        try:
            ear = float(ear_txt)
        except ValueError:
            raise ParseError(f"bad number {ear_txt!r}", field="ear") from None
        if not math.isfinite(ear) or ear < 0:
            raise SchemaError("must be finite and nonnegative", field="ear")
        return FrameObservation(t, True, precomputed_ear=ear)
    except (ParseError, SchemaError) as exc:
        raise exc.at_line(line_number) if line_number is not None else exc


# -- serialization -----------------------------------------------------------


def observation_to_dict(obs: FrameObservation) -> dict:
    out: dict = {"t": obs.timestamp, "face": obs.face_present}
    if obs.landmarks is not None:
        out["landmarks"] = [[p.x, p.y] for p in obs.landmarks.points]
    if obs.precomputed_ear is not None:
        out["ear"] = obs.precomputed_ear
    return out


def serialize_frame_record(obs: FrameObservation) -> str:
    """Render one record as a single JSON line without the trailing newline."""
    return json.dumps(observation_to_dict(obs), separators=(",", ":"), allow_nan=False)


def write_trace(frames: Iterable[FrameObservation], fp: IO[str]) -> int:
    n = 0
    for obs in frames:
        fp.write(serialize_frame_record(obs))
        fp.write("\n")
        n += 1
    return n


# -- reading -----------------------------------------------------------------


def iter_records(lines: Iterable[str | bytes]) -> Iterator[FrameObservation]:
    """Parse an iterable of lines lazily, auto-detecting JSON vs CSV.

    Blank lines are skipped. The CSV form is selected when the first
    non-blank line is exactly the ``t,face,ear`` header.
    """
    mode = None
    for number, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"invalid UTF-8: {exc.reason}", line=number) from None
        text = raw.rstrip("\r\n")
        if not text.strip():
            continue
        if mode is None:
            mode = "csv" if text.strip() == CSV_HEADER else "json"
            if mode == "csv":
                continue
        if mode == "csv":
            yield parse_csv_record(text, number)
        else:
            yield parse_frame_record(text, number)


def open_trace(source: str | Path | IO) -> Iterator[FrameObservation]:
    """Yield observations from a path or an open text/binary stream.

    The source is read line by line; nothing beyond the current record is
    held in memory. A path is opened here and closed when the generator
    finishes. ``OSError`` from opening or reading propagates unchanged.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fp:
            yield from iter_records(fp)
    else:
        yield from iter_records(source)


def read_trace(source: str | Path | IO, source_id: str | None = None) -> Trace:
    if source_id is None:
        source_id = Path(source).stem if isinstance(source, (str, Path)) else "<stream>"
    return Trace(list(open_trace(source)), source_id)


def loads_trace(text: str, source_id: str = "<string>") -> Trace:
    return Trace(list(iter_records(io.StringIO(text))), source_id)


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # "non_monotonic" | "duplicate_timestamp" | "gap"
    index: int
    severity: str  # "error" | "warning"
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(v.severity == "error" for v in self.violations)

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def validate_trace(trace: Trace | Sequence[FrameObservation]) -> ValidationReport:
    """Report timestamp problems without rejecting the trace.

    Duplicates and backwards steps are errors. An interval longer than ten
    times the median forward interval is a warning; the lower median is
    used so a single large gap cannot hide itself in a short trace.
    """
    frames = trace.frames if isinstance(trace, Trace) else list(trace)
    report = ValidationReport()
    times = [f.timestamp for f in frames]
    intervals = [b - a for a, b in zip(times, times[1:])]
    for i, dt in enumerate(intervals, start=1):
        if dt == 0:
            report.violations.append(
                Violation("duplicate_timestamp", i, "error", f"timestamp {times[i]!r} repeats")
            )
        elif dt < 0:
            report.violations.append(
                Violation("non_monotonic", i, "error", f"timestamp {times[i]!r} < {times[i - 1]!r}")
            )
    forward = [dt for dt in intervals if dt > 0]
    if forward:
        limit = GAP_FACTOR * statistics.median_low(forward)
        for i, dt in enumerate(intervals, start=1):
            if dt > limit:
                report.violations.append(
                    Violation("gap", i, "warning", f"gap of {dt:.6g}s exceeds {limit:.6g}s")
                )
    report.violations.sort(key=lambda v: v.index)
    return report
