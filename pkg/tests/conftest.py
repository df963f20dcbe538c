from __future__ import annotations

from pathlib import Path

import pytest

from drowsy.ingestion import FrameObservation

GOLDEN = Path(__file__).parent / "golden"
FPS = 30.0

_criteria: dict[int, tuple[str, list[str]]] = {}


def ear_trace(ears, fps: float = FPS, start: int = 0) -> list[FrameObservation]:
    """Frames at i/fps; ``None`` entries become no-face frames."""
    frames = []
    for i, ear in enumerate(ears, start=start):
        t = i / fps
        frames.append(FrameObservation(t, False) if ear is None else FrameObservation(t, True, precomputed_ear=ear))
    return frames


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    _criteria.setdefault(number, (title, []))[1].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcomes = _criteria[number]
        ok = outcomes and all(o == "passed" for o in outcomes)
        terminalreporter.write_line(f"AC{number} {'PASS' if ok else 'FAIL'}  {title}")
