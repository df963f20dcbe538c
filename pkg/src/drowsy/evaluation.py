"""Run the detector over labeled traces and score it against ground truth.

The accuracy metric is the correct rate ``CR = 100 * C / A`` for ``C``
correct tests out of ``A``. For the accuracy-table reproduction a test
(one table row, three drowsy episodes) counts as correct when at least two
of its three episodes raise an alarm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .detector import Detector, DetectorConfig, Event, EventKind
from .errors import MissingScenario, ZeroTotal
from .ingestion import FrameObservation, Trace
from .synth import ACCURACY_TABLE, TableRow, generate_trace, load_scenario

DEFAULT_GRACE_S = 2.0
ROW_PASS_MIN = 2
CR_DECIMALS = 2


@dataclass
class EventLog:
    events: list[Event]
    config_used: DetectorConfig
    trace_id: str = ""

    def of_kind(self, kind: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind is kind]

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class EpisodeResult:
    start_s: float
    end_s: float
    detected: bool
    detection_latency_s: float | None = None


@dataclass
class EvalReport:
    per_episode: list[EpisodeResult] = field(default_factory=list)
    false_alarm_count: int = 0

    @property
    def detected_count(self) -> int:
        return sum(1 for e in self.per_episode if e.detected)

    @property
    def episode_count(self) -> int:
        return len(self.per_episode)

    @property
    def correct_rate_percent(self) -> float:
        return correct_rate(self.detected_count, self.episode_count) if self.per_episode else 0.0

    def to_dict(self) -> dict:
        return {
            "per_episode": [
                {
                    "start": ep.start_s,
                    "end": ep.end_s,
                    "detected": ep.detected,
                    "latency_s": ep.detection_latency_s,
                }
                for ep in self.per_episode
            ],
            "detected_count": self.detected_count,
            "episode_count": self.episode_count,
            "false_alarm_count": self.false_alarm_count,
            "correct_rate_percent": format_percent(self.correct_rate_percent) if self.per_episode else None,
        }


def correct_rate(correct: int, total: int) -> float:
    """Return ``100 * correct / total``.

    Raises:
        ZeroTotal: ``total`` is zero.
    """
    if total == 0:
        raise ZeroTotal("correct rate of zero tests")
    if correct < 0 or total < 0 or correct > total:
        raise ValueError(f"need 0 <= correct <= total, got {correct}/{total}")
    return float(Fraction(100 * correct, total))


def format_percent(value: float) -> str:
    return f"{value:.{CR_DECIMALS}f}"


def run_detector_on_trace(trace: Trace | Sequence[FrameObservation], config: DetectorConfig) -> EventLog:
    """Batch form of folding ``detector.step`` over every frame.

    Raises:
        NonMonotonicTimestamp: carrying the offending frame index.
    """
    detector = Detector(config)
    frames = trace.frames if isinstance(trace, Trace) else trace
    events = detector.feed_all(frames)
    return EventLog(events, config, getattr(trace, "source_id", ""))


def match_alarms(
    log: EventLog | Iterable[Event],
    episodes: Sequence[tuple[float, float]],
    grace_s: float = DEFAULT_GRACE_S,
) -> EvalReport:
    """Match AlarmOn events to drowsy episodes.

    An episode is detected when an AlarmOn lands in ``[start, end + grace_s]``;
    latency is measured from the episode start to the first such alarm. An
    AlarmOn outside every window is a false alarm.
    """
    if grace_s < 0:
        raise ValueError("grace_s must be nonnegative")
    alarms = [e.timestamp for e in log if e.kind is EventKind.ALARM_ON]
    results = []
    for start, end in episodes:
        hits = [t for t in alarms if start <= t <= end + grace_s]
        if hits:
            results.append(EpisodeResult(start, end, True, hits[0] - start))
        else:
            results.append(EpisodeResult(start, end, False, None))
    false_alarms = sum(
        1 for t in alarms if not any(s <= t <= e + grace_s for s, e in episodes)
    )
    return EvalReport(results, false_alarms)


def evaluate(trace: Trace, episodes: Sequence[tuple[float, float]], config: DetectorConfig,
             grace_s: float = DEFAULT_GRACE_S) -> EvalReport:
    return match_alarms(run_detector_on_trace(trace, config), episodes, grace_s)


@dataclass
class RowResult:
    name: str
    row: TableRow | None
    report: EvalReport

    @property
    def passed(self) -> bool:
        return self.report.detected_count >= ROW_PASS_MIN


@dataclass
class TableReport:
    rows: list[RowResult]

    @property
    def passed_count(self) -> int:
        return sum(1 for r in self.rows if r.passed)

    @property
    def correct_rate_percent(self) -> float:
        return correct_rate(self.passed_count, len(self.rows))

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "name": r.name,
                    "row": r.row.to_dict() if r.row else None,
                    "passed": r.passed,
                    **r.report.to_dict(),
                }
                for r in self.rows
            ],
            "passed_count": self.passed_count,
            "test_count": len(self.rows),
            "correct_rate_percent": format_percent(self.correct_rate_percent),
        }


def bundled_scenario_dir() -> Path:
    return Path(__file__).with_name("scenarios")


def scenario_paths(scenario_dir: str | Path | None = None) -> list[Path]:
    """The ten table scenario files, one per accuracy-table row, in table order."""
    directory = Path(scenario_dir) if scenario_dir is not None else bundled_scenario_dir()
    paths = []
    for index, row in enumerate(ACCURACY_TABLE, start=1):
        path = directory / f"{index:02d}-{row.key}.json"
        if not path.is_file():
            raise MissingScenario(f"missing scenario file {path}")
        paths.append(path)
    return paths


def config_for(overrides: dict, base: DetectorConfig | None = None) -> DetectorConfig:
    data = (base or DetectorConfig()).to_dict()
    data.update(overrides)
    return DetectorConfig.from_dict(data)


def reproduce_paper_table(
    scenario_dir: str | Path | None = None, grace_s: float = DEFAULT_GRACE_S
) -> TableReport:
    """Generate, detect and score every accuracy-table scenario.

    Each scenario runs with its own ``detector`` overrides (the row's EAR
    threshold and alarm sensitivity as score threshold).
    """
    rows = []
    for path in scenario_paths(scenario_dir):
        script = load_scenario(path)
        labeled = generate_trace(script)
        config = config_for(script.detector)
        report = evaluate(labeled.trace, labeled.drowsy_episodes, config, grace_s)
        rows.append(RowResult(script.name, script.row, report))
    return TableReport(rows)


def render_report(report: EvalReport, title: str = "") -> str:
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'EPISODE':<18}{'DETECTED':<10}LATENCY_S")
    for ep in report.per_episode:
        latency = f"{ep.detection_latency_s:.3f}" if ep.detection_latency_s is not None else "-"
        lines.append(f"{f'{ep.start_s:g}-{ep.end_s:g}s':<18}{'yes' if ep.detected else 'no':<10}{latency}")
    lines.append(f"DROWSINESS DETECTION ALARM: {report.detected_count} out of {report.episode_count}")
    lines.append(f"FALSE ALARMS: {report.false_alarm_count}")
    if report.per_episode:
        lines.append(f"CR: {format_percent(report.correct_rate_percent)}%")
    return "\n".join(lines) + "\n"


def render_table(table: TableReport) -> str:
    header = (
        f"{'INDIVIDUAL':<11}{'EAR THRESHOLD':<15}{'ALARM SENSITIVITY':<19}"
        f"{'LIGHT':<10}{'REMARKS':<17}{'DROWSINESS DETECTION ALARM':<28}PASS"
    )
    lines = [header]
    for r in table.rows:
        row = r.row
        ind, thr, sens, light, remarks = (
            (row.individual, f"{row.ear_threshold:g}", str(row.alarm_sensitivity), row.light, row.remarks)
            if row else (r.name, "-", "-", "-", "-")
        )
        detected = f"{r.report.detected_count} out of {r.report.episode_count}"
        lines.append(
            f"{ind:<11}{thr:<15}{sens:<19}{light:<10}{remarks:<17}{detected:<28}{'yes' if r.passed else 'no'}"
        )
    lines.append(
        f"CR = {table.passed_count}/{len(table.rows)} = {format_percent(table.correct_rate_percent)}%"
    )
    return "\n".join(lines) + "\n"


def dumps_report(data: dict) -> str:
    return json.dumps(data, sort_keys=False) + "\n"


__all__ = [
    "DEFAULT_GRACE_S",
    "EpisodeResult",
    "EvalReport",
    "EventLog",
    "RowResult",
    "TableReport",
    "correct_rate",
    "evaluate",
    "match_alarms",
    "reproduce_paper_table",
    "run_detector_on_trace",
]
