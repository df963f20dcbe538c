"""Score-accumulator alarm state machine.

Every frame is classified Open, Closed or NoFace from its EAR. A closed
frame raises the drowsiness score, an open frame lowers it (never below
zero), and the alarm is on exactly while the score is strictly above
``score_threshold``. Missing faces are ignored for a while and, after
``no_face_limit`` consecutive frames, scored as closed eyes.

Closed runs are timed from the first closed frame to the first open frame
after it; runs inside the blink band produce ``Blink`` events. Frames
without a face never start, extend or end a run. PERCLOS is
the closed fraction of the last ``perclos_window`` frames.

The thresholds assume roughly 30 fps input. Scoring is per frame; record
timestamps only drive run durations and event times.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptyWindow, NonMonotonicTimestamp
from .geometry import LEFT_EYE_INDICES, RIGHT_EYE_INDICES, extract_eyes, mean_ear
from .ingestion import FrameObservation

# Slack for float timestamps such as 3/30 - 0/30 landing on 0.09999999999999999.
TIME_EPS = 1e-9


class EyeState(str, enum.Enum):
    OPEN = "Open"
    CLOSED = "Closed"
    NO_FACE = "NoFace"


class ClosureKind(str, enum.Enum):
    SHORT_NOISE = "ShortNoise"
    BLINK = "Blink"
    LONG_CLOSURE = "LongClosure"


class EventKind(str, enum.Enum):
    ALARM_ON = "AlarmOn"
    ALARM_OFF = "AlarmOff"
    BLINK = "Blink"
    LONG_CLOSURE_START = "LongClosureStart"
    FACE_LOST = "FaceLost"
    FACE_RECOVERED = "FaceRecovered"


@dataclass(frozen=True)
class DetectorConfig:
    """Tunable thresholds.

    ``score_cap`` bounds the score so the alarm releases promptly after a
    very long closure. ``None`` means three times ``score_threshold``;
    ``0`` disables the cap.
    """

    ear_threshold: float = 0.20
    score_threshold: int = 10
    score_increment: int = 1
    score_decrement: int = 1
    perclos_window: int = 90
    no_face_limit: int = 15
    blink_min_s: float = 0.1
    blink_max_s: float = 0.4
    nominal_fps: float = 30.0
    score_cap: int | None = None
    left_eye_indices: tuple[int, ...] = LEFT_EYE_INDICES
    right_eye_indices: tuple[int, ...] = RIGHT_EYE_INDICES

    def __post_init__(self) -> None:
        object.__setattr__(self, "left_eye_indices", tuple(self.left_eye_indices))
        object.__setattr__(self, "right_eye_indices", tuple(self.right_eye_indices))
        for name in ("score_threshold", "score_increment", "score_decrement", "perclos_window", "no_face_limit"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        for name in ("ear_threshold", "blink_min_s", "blink_max_s", "nominal_fps"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive real, got {value!r}")
        if self.blink_min_s >= self.blink_max_s:
            raise ValueError("blink_min_s must be below blink_max_s")
        if self.score_cap is not None and self.score_cap != 0 and self.score_cap <= self.score_threshold:
            raise ValueError("score_cap must exceed score_threshold (or be 0 to disable)")
        for name in ("left_eye_indices", "right_eye_indices"):
            idx = getattr(self, name)
            if len(idx) != 6 or any(not 0 <= i < 68 for i in idx):
                raise ValueError(f"{name} must be six indices in 0..67")

    @property
    def effective_score_cap(self) -> int | None:
        if self.score_cap is None:
            return 3 * self.score_threshold
        return self.score_cap or None

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown detector settings: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Event:
    kind: EventKind
    timestamp: float
    score_at_event: int
    ear_at_event: float | None = None


@dataclass(frozen=True)
class DetectorState:
    """Immutable detector state; ``step`` returns a new one per frame.

    ``perclos_buffer`` holds the effective state of the most recent frames
    and ``closed_in_buffer`` caches how many of them are Closed.
    """

    score: int = 0
    alarm_active: bool = False
    consecutive_no_face: int = 0
    closure_started_at: float | None = None
    long_closure_reported: bool = False
    face_lost: bool = False
    perclos_buffer: tuple[EyeState, ...] = ()
    closed_in_buffer: int = 0
    last_timestamp: float | None = None
    frames_seen: int = 0


def classify_eye_state(ear: float | None, config: DetectorConfig) -> EyeState:
    """Absent EAR means no face; EAR equal to the threshold counts as open."""
    if ear is None:
        return EyeState.NO_FACE
    return EyeState.CLOSED if ear < config.ear_threshold else EyeState.OPEN


def classify_closure(duration_s: float, config: DetectorConfig) -> ClosureKind:
    if duration_s < config.blink_min_s - TIME_EPS:
        return ClosureKind.SHORT_NOISE
    if duration_s > config.blink_max_s + TIME_EPS:
        return ClosureKind.LONG_CLOSURE
    return ClosureKind.BLINK


def observation_ear(obs: FrameObservation, config: DetectorConfig) -> float | None:
    """EAR of a frame, computing it from landmarks when needed."""
    if not obs.face_present:
        return None
    if obs.precomputed_ear is not None:
        return obs.precomputed_ear
    eyes = extract_eyes(obs.landmarks, config.left_eye_indices, config.right_eye_indices)
    return mean_ear(eyes)


def step(
    state: DetectorState, obs: FrameObservation, config: DetectorConfig
) -> tuple[DetectorState, list[Event]]:
    """Advance the detector by one frame.

    Returns the new state and the events raised by this frame, in the order
    face events, closure events, alarm events.

    Raises:
        NonMonotonicTimestamp: ``obs`` is not strictly after the previous frame.
        DegenerateEye: the frame's landmarks have coinciding eye corners.
    """
    t = obs.timestamp
    if state.last_timestamp is not None and not t > state.last_timestamp:
        raise NonMonotonicTimestamp(t, state.last_timestamp)

    ear = observation_ear(obs, config)
    raw = classify_eye_state(ear, config)
    pending: list[tuple[EventKind, float | None]] = []

    # no-face bookkeeping
    no_face = state.consecutive_no_face
    face_lost = state.face_lost
    if raw is EyeState.NO_FACE:
        no_face += 1
        if no_face == config.no_face_limit:
            face_lost = True
            pending.append((EventKind.FACE_LOST, None))
        effective = EyeState.CLOSED if no_face >= config.no_face_limit else EyeState.NO_FACE
    else:
        no_face = 0
        if face_lost:
            face_lost = False
            pending.append((EventKind.FACE_RECOVERED, ear))
        effective = raw

    # closed-run timing follows real eye frames only; NoFace neither extends nor ends a run
    started = state.closure_started_at
    long_reported = state.long_closure_reported
    if raw is EyeState.CLOSED:
        if started is None:
            started, long_reported = t, False
        elif not long_reported and t - started > config.blink_max_s + TIME_EPS:
            long_reported = True
            pending.append((EventKind.LONG_CLOSURE_START, ear))
    elif raw is EyeState.OPEN and started is not None:
        if classify_closure(t - started, config) is ClosureKind.BLINK:
            pending.append((EventKind.BLINK, ear))
        started, long_reported = None, False

    # scoring
    score = state.score
    if effective is EyeState.CLOSED:
        score += config.score_increment
        cap = config.effective_score_cap
        if cap is not None:
            score = min(score, cap)
    elif effective is EyeState.OPEN:
        score = max(0, score - config.score_decrement)
    alarm = score > config.score_threshold
    if alarm and not state.alarm_active:
        pending.append((EventKind.ALARM_ON, ear))
    elif state.alarm_active and not alarm:
        pending.append((EventKind.ALARM_OFF, ear))

    # perclos ring
    buf = state.perclos_buffer
    closed = state.closed_in_buffer
    if len(buf) == config.perclos_window:
        if buf[0] is EyeState.CLOSED:
            closed -= 1
        buf = buf[1:]
    buf = buf + (effective,)
    if effective is EyeState.CLOSED:
        closed += 1

    events = [Event(kind, t, score, e) for kind, e in pending]
    new_state = DetectorState(
        score=score,
        alarm_active=alarm,
        consecutive_no_face=no_face,
        closure_started_at=started,
        long_closure_reported=long_reported,
        face_lost=face_lost,
        perclos_buffer=buf,
        closed_in_buffer=closed,
        last_timestamp=t,
        frames_seen=state.frames_seen + 1,
    )
    return new_state, events


def perclos(state: DetectorState) -> float:
    """Closed fraction of the PERCLOS window, in [0, 1].

    Raises:
        EmptyWindow: no frame has been processed yet.
    """
    if not state.perclos_buffer:
        raise EmptyWindow("no frames processed yet")
    return state.closed_in_buffer / len(state.perclos_buffer)


def perclos_fraction(state: DetectorState) -> Fraction:
    if not state.perclos_buffer:
        raise EmptyWindow("no frames processed yet")
    return Fraction(state.closed_in_buffer, len(state.perclos_buffer))


def blink_rate(events: Iterable[Event], window_s: float, now_s: float) -> float:
    """Blinks per minute among events with ``now_s - window_s < t <= now_s``."""
    if not window_s > 0:
        raise ValueError("window_s must be positive")
    start = now_s - window_s
    count = sum(
        1 for e in events if e.kind is EventKind.BLINK and start < e.timestamp <= now_s
    )
    return 60.0 * count / window_s


class Detector:
    """Stateful convenience wrapper for streaming use.

    Not thread-safe; use one instance per stream.
    """

    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()
        self.state = DetectorState()

    def feed(self, obs: FrameObservation) -> list[Event]:
        try:
            self.state, events = step(self.state, obs, self.config)
        except NonMonotonicTimestamp as exc:
            raise NonMonotonicTimestamp(exc.timestamp, exc.previous, self.state.frames_seen) from None
        return events

    def feed_all(self, frames: Sequence[FrameObservation]) -> list[Event]:
        out: list[Event] = []
        for obs in frames:
            out.extend(self.feed(obs))
        return out

    @property
    def perclos(self) -> float:
        return perclos(self.state)

    def reset(self) -> None:
        self.state = DetectorState()


__all__ = [
    "ClosureKind",
    "Detector",
    "DetectorConfig",
    "DetectorState",
    "Event",
    "EventKind",
    "EyeState",
    "blink_rate",
    "classify_closure",
    "classify_eye_state",
    "observation_ear",
    "perclos",
    "perclos_fraction",
    "step",
]
