"""Deterministic synthetic EAR / landmark traces from scenario scripts.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014) with
Box-Muller normals, coded here so a given seed produces the same trace on
any platform or in any other language. Every frame consumes exactly three
64-bit draws, in order: one dropout uniform and two normal uniforms.

Scenario files are single JSON documents::

    {
      "name": "A-bright-normal",
      "duration_s": 60, "fps": 30,
      "baseline_open_ear": 0.24, "baseline_closed_ear": 0.15,
      "noise_stddev": 0.005, "dropout_probability": 0.0, "seed": 1,
      "segments": [
        {"start": 0, "end": 15, "kind": "blink", "period": 4.0},
        {"start": 15, "end": 17, "kind": "closed"},
        ...
      ],
      "row": {...},        # optional accuracy-table row
      "detector": {...}    # optional detector overrides for evaluation
    }

Segment kinds are ``open``, ``closed``, ``blink`` (needs ``period``) and
``face_absent``. Frames outside every segment are open eyes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import InvalidScript, UnknownRow
from .geometry import LEFT_EYE_INDICES, RIGHT_EYE_INDICES, FaceLandmarks68
from .ingestion import FrameObservation, Trace

_MASK64 = (1 << 64) - 1
_EPS = 1e-9

SEGMENT_KINDS = ("open", "closed", "blink", "face_absent")
BLINK_CLOSED_S = 0.2
DROWSY_MIN_S = 0.4


class SplitMix64:
    """SplitMix64 generator with a Box-Muller normal helper."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # (0, 1], keeps log finite
        u2 = (self.next_u64() >> 11) * 2.0**-53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class Segment:
    start_s: float
    end_s: float
    kind: str
    period_s: float | None = None

    def to_dict(self) -> dict:
        out: dict = {"start": self.start_s, "end": self.end_s, "kind": self.kind}
        if self.period_s is not None:
            out["period"] = self.period_s
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Segment":
        try:
            return cls(float(data["start"]), float(data["end"]), str(data["kind"]),
                       None if data.get("period") is None else float(data["period"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScript(f"bad segment {data!r}: {exc}") from None


@dataclass(frozen=True)
class TableRow:
    """One row of the accuracy-test table."""

    individual: str
    ear_threshold: float
    alarm_sensitivity: int
    light: str
    remarks: str
    detected_of_3: int

    @property
    def key(self) -> str:
        return f"{self.individual}-{self.light}-{self.remarks}".lower().replace(" ", "-")

    def to_dict(self) -> dict:
        return {
            "individual": self.individual,
            "ear_threshold": self.ear_threshold,
            "alarm_sensitivity": self.alarm_sensitivity,
            "light": self.light,
            "remarks": self.remarks,
            "detected_of_3": self.detected_of_3,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TableRow":
        return cls(**data)


ACCURACY_TABLE: tuple[TableRow, ...] = (
    TableRow("A", 0.2, 48, "Bright", "Normal", 3),
    TableRow("A", 0.2, 48, "Dim", "Normal", 3),
    TableRow("A", 0.2, 48, "Bright", "Wear sunglasses", 0),
    TableRow("B", 0.25, 43, "Bright", "Normal", 3),
    TableRow("B", 0.25, 43, "Dim", "Normal", 3),
    TableRow("B", 0.25, 43, "Dim", "Rainy weather", 2),
    TableRow("C", 0.22, 48, "Bright", "Wear glasses", 3),
    TableRow("C", 0.22, 48, "Dim", "Wear glasses", 3),
    TableRow("C", 0.22, 48, "Very Dim", "Night drive", 1),
    TableRow("C", 0.22, 48, "Very Dim", "Normal", 3),
)

LIGHT_NOISE = {"Bright": 0.005, "Dim": 0.02, "Very Dim": 0.05}
# remark -> (noise override, dropout probability)
REMARK_EFFECTS: dict[str, tuple[float | None, float]] = {
    "Normal": (None, 0.0),
    "Wear glasses": (None, 0.0),
    "Wear sunglasses": (None, 1.0),
    "Night drive": (None, 0.5),
    "Rainy weather": (0.04, 0.0),
}
# Per-driver (open, closed) EAR baselines. A uses the reference eye values.
INDIVIDUAL_BASELINES: dict[str, tuple[float, float]] = {
    "A": (0.24, 0.15),
    "B": (0.32, 0.216),
    "C": (0.30, 0.12),
}
TEST_DURATION_S = 60.0
TEST_FPS = 30.0
EPISODES: tuple[tuple[float, float], ...] = ((15.0, 2.0), (30.0, 3.0), (45.0, 6.0))
BLINK_PERIOD_S = 4.0


@dataclass
class ScenarioScript:
    duration_s: float
    fps: float
    segments: list[Segment] = field(default_factory=list)
    baseline_open_ear: float = 0.24
    baseline_closed_ear: float = 0.15
    noise_stddev: float = 0.0
    dropout_probability: float = 0.0
    seed: int = 0
    name: str = ""
    row: TableRow | None = None
    detector: dict = field(default_factory=dict)

    def validate(self) -> None:
        """Raise InvalidScript if any invariant is broken."""
        def positive(name: str) -> None:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InvalidScript(f"{name} must be positive, got {value!r}")

        positive("duration_s")
        positive("fps")
        for name in ("baseline_open_ear", "baseline_closed_ear", "noise_stddev"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidScript(f"{name} must be finite and nonnegative, got {value!r}")
        if not self.baseline_closed_ear < self.baseline_open_ear:
            raise InvalidScript("baseline_closed_ear must be below baseline_open_ear")
        if not 0.0 <= self.dropout_probability <= 1.0:
            raise InvalidScript("dropout_probability must lie in [0, 1]")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= _MASK64:
            raise InvalidScript("seed must be an unsigned 64-bit integer")
        prev_end = 0.0
        for seg in sorted(self.segments, key=lambda s: s.start_s):
            if seg.kind not in SEGMENT_KINDS:
                raise InvalidScript(f"unknown segment kind {seg.kind!r}")
            if not (0.0 <= seg.start_s < seg.end_s <= self.duration_s):
                raise InvalidScript(f"segment {seg.start_s}..{seg.end_s} outside [0, {self.duration_s}]")
            if seg.start_s < prev_end:
                raise InvalidScript(f"segment starting at {seg.start_s} overlaps its predecessor")
            if seg.kind == "blink":
                if seg.period_s is None or not seg.period_s > BLINK_CLOSED_S:
                    raise InvalidScript(f"blink segment needs period > {BLINK_CLOSED_S}s")
            elif seg.period_s is not None:
                raise InvalidScript("period only applies to blink segments")
            prev_end = seg.end_s

    def to_dict(self) -> dict:
        out: dict = {
            "name": self.name,
            "duration_s": self.duration_s,
            "fps": self.fps,
            "baseline_open_ear": self.baseline_open_ear,
            "baseline_closed_ear": self.baseline_closed_ear,
            "noise_stddev": self.noise_stddev,
            "dropout_probability": self.dropout_probability,
            "seed": self.seed,
            "segments": [s.to_dict() for s in self.segments],
        }
        if self.row is not None:
            out["row"] = self.row.to_dict()
        if self.detector:
            out["detector"] = dict(self.detector)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioScript":
        if not isinstance(data, dict):
            raise InvalidScript("scenario must be a JSON object")
        known = {"name", "duration_s", "fps", "baseline_open_ear", "baseline_closed_ear",
                 "noise_stddev", "dropout_probability", "seed", "segments", "row", "detector"}
        unknown = set(data) - known
        if unknown:
            raise InvalidScript(f"unknown scenario keys: {', '.join(sorted(unknown))}")
        try:
            script = cls(
                duration_s=float(data["duration_s"]),
                fps=float(data["fps"]),
                segments=[Segment.from_dict(s) for s in data.get("segments", [])],
                baseline_open_ear=float(data.get("baseline_open_ear", 0.24)),
                baseline_closed_ear=float(data.get("baseline_closed_ear", 0.15)),
                noise_stddev=float(data.get("noise_stddev", 0.0)),
                dropout_probability=float(data.get("dropout_probability", 0.0)),
                seed=data.get("seed", 0),
                name=str(data.get("name", "")),
                row=TableRow.from_dict(data["row"]) if data.get("row") else None,
                detector=dict(data.get("detector") or {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScript(f"bad scenario: {exc}") from None
        script.validate()
        return script


def load_scenario(path: str | Path) -> ScenarioScript:
    """Read a scenario file. OSError propagates; bad content raises InvalidScript."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise InvalidScript(f"{path}: not valid JSON: {exc}") from None
    script = ScenarioScript.from_dict(data)
    if not script.name:
        script.name = Path(path).stem
    return script


def dump_scenario(script: ScenarioScript) -> str:
    return json.dumps(script.to_dict(), indent=2) + "\n"


@dataclass
class LabeledTrace:
    trace: Trace
    drowsy_episodes: list[tuple[float, float]]


def _frame_index(t: float, fps: float) -> int:
    """First frame index whose timestamp i/fps is at or after ``t``."""
    return max(0, math.ceil(t * fps - _EPS))


def _frame_plan(script: ScenarioScript, n: int) -> list[str]:
    """Per-frame intended state: 'open', 'closed' or 'absent'."""
    plan = ["open"] * n
    fps = script.fps
    for seg in script.segments:
        lo, hi = _frame_index(seg.start_s, fps), min(n, _frame_index(seg.end_s, fps))
        if seg.kind == "closed":
            plan[lo:hi] = ["closed"] * (hi - lo)
        elif seg.kind == "face_absent":
            plan[lo:hi] = ["absent"] * (hi - lo)
        elif seg.kind == "blink":
            run = max(1, round(BLINK_CLOSED_S * fps))
            k = 0
            while True:
                # closed run centred in each period
                run_start = seg.start_s + k * seg.period_s + (seg.period_s - BLINK_CLOSED_S) / 2
                if run_start >= seg.end_s:
                    break
                a = _frame_index(run_start, fps)
                b = min(hi, a + run)
                plan[a:b] = ["closed"] * max(0, b - a)
                k += 1
    return plan


def eye_points(ear: float, corner: tuple[float, float], width: float = 30.0) -> list[tuple[float, float]]:
    """Six eye points a1..a6 whose EAR is ``ear``: lids at +-ear*width/2."""
    x0, y0 = corner
    h = ear * width / 2.0
    return [
        (x0, y0),
        (x0 + 0.3 * width, y0 - h),
        (x0 + 0.7 * width, y0 - h),
        (x0 + width, y0),
        (x0 + 0.7 * width, y0 + h),
        (x0 + 0.3 * width, y0 + h),
    ]


def synthetic_face(ear: float) -> list[tuple[float, float]]:
    """A 68-point face whose eyes both have the given EAR."""
    pts: list[tuple[float, float]] = []
    for i in range(17):  # jaw
        a = math.pi * i / 16
        pts.append((200.0 - 110.0 * math.cos(a), 220.0 + 90.0 * math.sin(a)))
    for i in range(10):  # brows
        pts.append((120.0 + 18.0 * i + (16.0 if i >= 5 else 0.0), 160.0))
    for i in range(9):  # nose
        pts.append((200.0 + (0 if i < 4 else 8.0 * (i - 6)), 180.0 + 12.0 * min(i, 4)))
    for i in range(20):  # mouth
        a = 2 * math.pi * i / 20
        pts.append((200.0 + 35.0 * math.cos(a), 280.0 + 12.0 * math.sin(a)))
    face = pts[:36] + [(0.0, 0.0)] * 12 + pts[36:]
    left = eye_points(ear, (135.0, 190.0))
    right = eye_points(ear, (235.0, 190.0))
    for idx, p in zip(LEFT_EYE_INDICES, left):
        face[idx] = p
    for idx, p in zip(RIGHT_EYE_INDICES, right):
        face[idx] = p
    return face


def iter_frames(script: ScenarioScript, emit_landmarks: bool = False) -> Iterator[FrameObservation]:
    """Yield the frames of a scenario one at a time."""
    script.validate()
    n = math.floor(script.duration_s * script.fps + _EPS)
    plan = _frame_plan(script, n)
    rng = SplitMix64(script.seed)
    for i in range(n):
        t = i / script.fps
        dropped = rng.uniform() < script.dropout_probability
        noise = script.noise_stddev * rng.normal()
        kind = plan[i]
        if kind == "absent" or dropped:
            yield FrameObservation(t, False)
            continue
        base = script.baseline_closed_ear if kind == "closed" else script.baseline_open_ear
        ear = max(0.0, base + noise)
        if emit_landmarks:
            yield FrameObservation(t, True, landmarks=FaceLandmarks68(synthetic_face(ear)))
        else:
            yield FrameObservation(t, True, precomputed_ear=ear)


def generate_trace(script: ScenarioScript, emit_landmarks: bool = False) -> LabeledTrace:
    """Build the labeled trace for a scenario.

    Closed-eye segments longer than 0.4 s are the ground-truth drowsy
    episodes.

    Raises:
        InvalidScript: the script violates its invariants.
    """
    frames = list(iter_frames(script, emit_landmarks))
    episodes = [
        (seg.start_s, seg.end_s)
        for seg in sorted(script.segments, key=lambda s: s.start_s)
        if seg.kind == "closed" and seg.end_s - seg.start_s > DROWSY_MIN_S
    ]
    return LabeledTrace(Trace(frames, script.name or f"seed-{script.seed}"), episodes)


def find_row(individual: str, light: str, remarks: str) -> TableRow:
    for row in ACCURACY_TABLE:
        if (row.individual, row.light, row.remarks) == (individual, light, remarks):
            return row
    raise UnknownRow(f"no table row for {individual}/{light}/{remarks}")


def scenario_from_table_row(row: TableRow | str, seed: int | None = None) -> ScenarioScript:
    """Build the scenario script for one accuracy-table row.

    ``row`` is a TableRow from ACCURACY_TABLE or its ``key`` string such as
    ``"a-bright-normal"``. Lighting sets the EAR noise, remarks may
    override noise or add face dropout, and the individual picks the EAR
    baselines. Each test runs 60 s at 30 fps with three drowsy episodes.
    """
    if isinstance(row, str):
        matches = [r for r in ACCURACY_TABLE if r.key == row.lower()]
        if not matches:
            raise UnknownRow(f"no table row with key {row!r}")
        row = matches[0]
    elif row not in ACCURACY_TABLE:
        raise UnknownRow(f"row {row!r} is not in the accuracy table")
    noise_override, dropout = REMARK_EFFECTS[row.remarks]
    noise = noise_override if noise_override is not None else LIGHT_NOISE[row.light]
    open_ear, closed_ear = INDIVIDUAL_BASELINES[row.individual]

    segments: list[Segment] = []
    cursor = 0.0
    for start, length in EPISODES:
        segments.append(Segment(cursor, start, "blink", BLINK_PERIOD_S))
        segments.append(Segment(start, start + length, "closed"))
        cursor = start + length
    segments.append(Segment(cursor, TEST_DURATION_S, "blink", BLINK_PERIOD_S))

    if seed is None:
        seed = ACCURACY_TABLE.index(row) + 1
    return ScenarioScript(
        duration_s=TEST_DURATION_S,
        fps=TEST_FPS,
        segments=segments,
        baseline_open_ear=open_ear,
        baseline_closed_ear=closed_ear,
        noise_stddev=noise,
        dropout_probability=dropout,
        seed=seed,
        name=f"{ACCURACY_TABLE.index(row) + 1:02d}-{row.key}",
        row=row,
        detector={"ear_threshold": row.ear_threshold, "score_threshold": row.alarm_sensitivity},
    )
