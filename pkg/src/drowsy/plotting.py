"""Per-frame CSV rows and a dependency-free SVG chart of EAR and score."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

from .detector import Detector, DetectorConfig, EyeState, classify_eye_state, observation_ear, perclos
from .ingestion import FrameObservation

CSV_COLUMNS = ("t", "ear", "eye_state", "score", "alarm_active", "perclos")


@dataclass(frozen=True)
class PlotRow:
    t: float
    ear: float | None
    eye_state: EyeState
    score: int
    alarm_active: bool
    perclos: float

    @classmethod
    def from_step(cls, obs: FrameObservation, detector: Detector) -> "PlotRow":
        """Snapshot after ``detector`` has consumed ``obs``.

        ``eye_state`` is the frame's own classification, so missing faces
        show as NoFace even once they are scored as closed.
        """
        ear = observation_ear(obs, detector.config)
        state = detector.state
        return cls(
            t=obs.timestamp,
            ear=ear,
            eye_state=classify_eye_state(ear, detector.config),
            score=state.score,
            alarm_active=state.alarm_active,
            perclos=perclos(state),
        )


def csv_header() -> str:
    return ",".join(CSV_COLUMNS) + "\n"


def csv_line(row: PlotRow) -> str:
    ear = "" if row.ear is None else repr(row.ear)
    return f"{row.t!r},{ear},{row.eye_state.value},{row.score},{int(row.alarm_active)},{row.perclos:.6f}\n"


def _polyline(points: Sequence[tuple[float, float]], color: str) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'


def render_svg(rows: Sequence[PlotRow], config: DetectorConfig, width: int = 900, height: int = 420) -> str:
    """Two stacked panels: EAR with its threshold on top, score with its threshold below."""
    pad = 40
    panel_h = (height - 3 * pad) / 2
    t0 = rows[0].t if rows else 0.0
    t1 = rows[-1].t if rows else 1.0
    span = (t1 - t0) or 1.0

    def x(t: float) -> float:
        return pad + (t - t0) / span * (width - 2 * pad)

    ears = [r.ear for r in rows if r.ear is not None]
    ear_max = max(ears + [config.ear_threshold * 1.5])
    score_max = max([r.score for r in rows] + [config.score_threshold + 1])

    def y_ear(v: float) -> float:
        return pad + panel_h * (1 - v / ear_max)

    def y_score(v: float) -> float:
        return 2 * pad + panel_h + panel_h * (1 - v / score_max)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{pad}" y="{pad - 10}" font-size="12">EAR</text>',
        f'<text x="{pad}" y="{2 * pad + panel_h - 10}" font-size="12">score</text>',
    ]
    for top in (pad, 2 * pad + panel_h):
        parts.append(
            f'<rect x="{pad}" y="{top:.2f}" width="{width - 2 * pad}" height="{panel_h:.2f}" '
            'fill="none" stroke="#999"/>'
        )
    # EAR drawn in runs so no-face frames leave gaps
    run: list[tuple[float, float]] = []
    for r in rows:
        if r.ear is None:
            if len(run) > 1:
                parts.append(_polyline(run, "#1f77b4"))
            run = []
        else:
            run.append((x(r.t), y_ear(r.ear)))
    if len(run) > 1:
        parts.append(_polyline(run, "#1f77b4"))
    yt = y_ear(config.ear_threshold)
    parts.append(f'<line x1="{pad}" x2="{width - pad}" y1="{yt:.2f}" y2="{yt:.2f}" stroke="#d62728" stroke-dasharray="4 3"/>')
    if len(rows) > 1:
        parts.append(_polyline([(x(r.t), y_score(r.score)) for r in rows], "#2ca02c"))
    ys = y_score(config.score_threshold)
    parts.append(f'<line x1="{pad}" x2="{width - pad}" y1="{ys:.2f}" y2="{ys:.2f}" stroke="#d62728" stroke-dasharray="4 3"/>')
    label = escape(f"t = {t0:g} .. {t1:g} s")
    parts.append(f'<text x="{width - pad}" y="{height - 10}" font-size="12" text-anchor="end">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
