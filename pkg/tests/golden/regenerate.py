"""Rebuild the golden CLI fixtures in this directory.

Run only after an intentional output change, then review the diff::

    python tests/golden/regenerate.py
"""

from __future__ import annotations

from pathlib import Path

from click.testing import CliRunner

from drowsy.cli import cli
from drowsy.evaluation import bundled_scenario_dir
from drowsy.ingestion import FrameObservation, write_trace

HERE = Path(__file__).parent

# (output file, argv) pairs; argv paths are relative to this directory
COMMANDS = [
    ("closed25.events.jsonl", ["replay", "closed25.jsonl"]),
    ("closed25.plot.csv", ["plot", "closed25.jsonl"]),
    ("row-a.events.jsonl", ["replay", "row-a.jsonl"]),
    ("row-a.plot.csv", ["plot", "row-a.jsonl"]),
    ("row-a.eval.txt", ["eval", "row-a.jsonl", "row-a.labels.json"]),
    ("row-a.eval.json", ["eval", "row-a.jsonl", "row-a.labels.json", "--format", "json"]),
    ("table.txt", ["eval", "--table"]),
]


def closed25_frames() -> list[FrameObservation]:
    """25 closed frames, 35 open frames, then a short face dropout."""
    ears = [0.1] * 25 + [0.3] * 35
    frames = [FrameObservation(i / 30, True, precomputed_ear=e) for i, e in enumerate(ears)]
    frames += [FrameObservation((60 + i) / 30, False) for i in range(5)]
    return frames


def run(argv: list[str]) -> str:
    result = CliRunner().invoke(cli, [_resolve(a) for a in argv], catch_exceptions=False)
    if result.exit_code != 0:
        raise SystemExit(f"{argv} exited {result.exit_code}")
    return result.stdout


def _resolve(arg: str) -> str:
    path = HERE / arg
    return str(path) if path.exists() else arg


def main() -> None:
    with open(HERE / "closed25.jsonl", "w", encoding="utf-8", newline="\n") as fp:
        write_trace(closed25_frames(), fp)
    scenario = bundled_scenario_dir() / "01-a-bright-normal.json"
    runner = CliRunner()
    result = runner.invoke(
        cli,
        ["simulate", str(scenario), str(HERE / "row-a.jsonl"), "--labels", str(HERE / "row-a.labels.json")],
    )
    if result.exit_code != 0:
        raise SystemExit(result.output)
    for name, argv in COMMANDS:
        (HERE / name).write_text(run(argv), encoding="utf-8", newline="\n")


if __name__ == "__main__":
    main()
