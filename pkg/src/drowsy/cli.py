"""``drowsy`` command-line interface.

Exit codes:

    0  success
    1  malformed record (parse error)
    2  schema violation or degenerate landmarks
    3  non-monotonic timestamps
    4  I/O error (missing file, unreadable stream, socket failure)
    5  invalid scenario script
    64 command-line usage error
"""

from __future__ import annotations

import json
import os
import shlex
import socket
import subprocess
import sys
import threading
from contextlib import ExitStack, contextmanager
from pathlib import Path
from typing import IO, Iterator

import click

from . import __version__
from .detector import Detector, DetectorConfig, Event, EventKind
from .errors import (
    DegenerateEye,
    InvalidScript,
    NonMonotonicTimestamp,
    ParseError,
    SchemaError,
)
from .evaluation import (
    DEFAULT_GRACE_S,
    config_for,
    dumps_report,
    match_alarms,
    render_report,
    render_table,
    reproduce_paper_table,
    run_detector_on_trace,
)
from .ingestion import iter_records, open_trace, read_trace, write_trace
from .plotting import PlotRow, csv_header, csv_line, render_svg
from .synth import generate_trace, load_scenario

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_SCHEMA = 2
EXIT_TIMESTAMP = 3
EXIT_IO = 4
EXIT_SCRIPT = 5
EXIT_USAGE = 64


def event_to_dict(event: Event) -> dict:
    out: dict = {"kind": event.kind.value, "t": event.timestamp, "score": event.score_at_event}
    if event.ear_at_event is not None:
        out["ear"] = event.ear_at_event
    return out


def format_event(event: Event) -> str:
    return json.dumps(event_to_dict(event), separators=(",", ":"))


@contextmanager
def _exit_on_error() -> Iterator[None]:
    """Turn package errors into a diagnostic line and a documented exit code."""
    try:
        yield
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stop quietly
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        sys.exit(EXIT_IO)
    except ParseError as exc:
        _fail(EXIT_PARSE, f"parse error: {exc}")
    except (SchemaError, DegenerateEye) as exc:
        _fail(EXIT_SCHEMA, f"schema error: {exc}")
    except NonMonotonicTimestamp as exc:
        _fail(EXIT_TIMESTAMP, f"timestamp error: {exc}")
    except InvalidScript as exc:
        _fail(EXIT_SCRIPT, f"invalid scenario: {exc}")
    except OSError as exc:
        _fail(EXIT_IO, f"I/O error: {exc}")


def _fail(code: int, message: str) -> None:
    click.echo(f"drowsy: {message}", err=True)
    sys.exit(code)


class AlarmHook:
    """Runs a user command once per AlarmOn without blocking the caller.

    The command is split shell-style and started in a background thread;
    its stdout goes to our stderr so the event stream stays clean.
    Event details are passed as DROWSY_EVENT_T, DROWSY_SCORE and
    DROWSY_EAR environment variables. Failures are reported on stderr.
    """

    def __init__(self, command: str):
        self.argv = shlex.split(command)
        if not self.argv:
            raise click.BadParameter("on-alarm command is empty")
        self._threads: list[threading.Thread] = []
        try:
            self.stdout: int | None = sys.stderr.fileno()
        except (AttributeError, OSError, ValueError):
            self.stdout = subprocess.DEVNULL

    def fire(self, event: Event) -> None:
        env = dict(os.environ)
        env["DROWSY_EVENT_T"] = repr(event.timestamp)
        env["DROWSY_SCORE"] = str(event.score_at_event)
        env["DROWSY_EAR"] = "" if event.ear_at_event is None else repr(event.ear_at_event)
        thread = threading.Thread(target=self._run, args=(env,), daemon=True)
        thread.start()
        self._threads.append(thread)

    def _run(self, env: dict) -> None:
        try:
            proc = subprocess.run(self.argv, env=env, stdin=subprocess.DEVNULL, stdout=self.stdout)
        except OSError as exc:
            click.echo(f"drowsy: alarm hook failed: {exc}", err=True)
            return
        if proc.returncode != 0:
            click.echo(f"drowsy: alarm hook exited with status {proc.returncode}", err=True)

    def wait(self, timeout: float = 30.0) -> None:
        for thread in self._threads:
            thread.join(timeout)


# -- option plumbing -----------------------------------------------------------

_DETECTOR_FLAGS = [
    ("ear_threshold", float, "EAR below this is a closed eye."),
    ("score_threshold", int, "Alarm while the score is strictly above this."),
    ("score_increment", int, "Score added per closed frame."),
    ("score_decrement", int, "Score removed per open frame."),
    ("perclos_window", int, "PERCLOS window length in frames."),
    ("no_face_limit", int, "Consecutive no-face frames before they count as closed."),
    ("blink_min_s", float, "Shortest closed run counted as a blink."),
    ("blink_max_s", float, "Longest closed run counted as a blink."),
    ("nominal_fps", float, "Nominal input frame rate."),
    ("score_cap", int, "Upper bound on the score (0 disables; default 3x threshold)."),
]


def detector_options(func):
    for name, kind, help_text in reversed(_DETECTOR_FLAGS):
        func = click.option(f"--{name.replace('_', '-')}", name, type=kind, default=None, help=help_text)(func)
    func = click.option(
        "--config", "config_path", type=click.Path(dir_okay=False), default=None,
        help="JSON file of detector settings; flags override it.",
    )(func)
    return func


def build_config(flags: dict, config_path: str | None, hints: dict | None = None) -> DetectorConfig:
    """Defaults, then trace hints, then the config file, then explicit flags."""
    overrides: dict = dict(hints or {})
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except ValueError as exc:
            raise click.BadParameter(f"not valid JSON: {exc}", param_hint="--config") from None
        if not isinstance(data, dict):
            raise click.BadParameter("config file must hold a JSON object", param_hint="--config")
        overrides.update(data)
    overrides.update({k: v for k, v in flags.items() if v is not None})
    try:
        return config_for(overrides)
    except (TypeError, ValueError) as exc:
        raise click.BadParameter(str(exc)) from None


def _pop_detector_flags(kwargs: dict) -> dict:
    return {name: kwargs.pop(name) for name, _, _ in _DETECTOR_FLAGS}


@contextmanager
def _tcp_lines(address: str) -> Iterator[IO[bytes]]:
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter(f"expected HOST:PORT, got {address!r}", param_hint="--listen")
    with socket.create_server((host, int(port))) as server:
        bound = server.getsockname()
        click.echo(f"drowsy: listening on {bound[0]}:{bound[1]}", err=True)
        conn, _ = server.accept()
        with conn, conn.makefile("rb") as stream:
            yield stream


# -- commands ------------------------------------------------------------------


class _Group(click.Group):
    """Group that reserves exit code 2 for schema errors by moving usage errors to 64."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, standalone_mode, **extra)
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        sys.exit(rv if isinstance(rv, int) else 0)


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="drowsy")
def cli() -> None:
    """Eye-aspect-ratio drowsiness detection over landmark traces."""


@cli.command()
@click.argument("input_path", metavar="INPUT", default="-", required=False)
@click.option("--listen", default=None, metavar="HOST:PORT", help="Accept one TCP connection and read records from it.")
@click.option("-o", "--output", default="-", help="Event sink; '-' is stdout.")
@click.option("--on-alarm", "on_alarm", default=None, help="Command run (detached) on every AlarmOn.")
@click.option("--plot-output", default=None, help="Also write the per-frame CSV here.")
@detector_options
def replay(input_path, listen, output, on_alarm, plot_output, config_path, **kwargs):
    """Stream a trace through the detector, printing one event per line."""
    flags = _pop_detector_flags(kwargs)
    with _exit_on_error():
        config = build_config(flags, config_path)
    hook = AlarmHook(on_alarm) if on_alarm is not None else None
    detector = Detector(config)
    try:
        with _exit_on_error(), ExitStack() as stack:
            if listen:
                source = stack.enter_context(_tcp_lines(listen))
            elif input_path == "-":
                source = click.get_binary_stream("stdin")
            else:
                source = stack.enter_context(open(input_path, "rb"))
            sink = (
                click.get_text_stream("stdout")
                if output == "-"
                else stack.enter_context(open(output, "w", encoding="utf-8", newline="\n"))
            )
            plot = (
                stack.enter_context(open(plot_output, "w", encoding="utf-8", newline="\n"))
                if plot_output else None
            )
            if plot:
                plot.write(csv_header())
            for obs in iter_records(source):
                events = detector.feed(obs)
                for event in events:
                    sink.write(format_event(event) + "\n")
                    if hook and event.kind is EventKind.ALARM_ON:
                        hook.fire(event)
                if events:
                    sink.flush()
                if plot:
                    plot.write(csv_line(PlotRow.from_step(obs, detector)))
            sink.flush()
    finally:
        if hook:
            hook.wait()


@cli.command()
@click.argument("scenario", type=click.Path(dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--labels", "labels_path", default=None, help="Labels sidecar path (default: OUT with .labels.json).")
@click.option("--landmarks", is_flag=True, help="Emit full 68-point landmarks instead of EAR values.")
def simulate(scenario, out, labels_path, landmarks):
    """Generate a labeled synthetic trace from a scenario file."""
    with _exit_on_error():
        script = load_scenario(scenario)
        labeled = generate_trace(script, emit_landmarks=landmarks)
        out_path = Path(out)
        labels = Path(labels_path) if labels_path else out_path.with_suffix(".labels.json")
        with open(out_path, "w", encoding="utf-8", newline="\n") as fp:
            write_trace(labeled.trace.frames, fp)
        payload = {
            "trace_id": labeled.trace.source_id,
            "drowsy_episodes": [[s, e] for s, e in labeled.drowsy_episodes],
            "detector": script.detector,
        }
        labels.write_text(json.dumps(payload) + "\n", encoding="utf-8")
        click.echo(f"wrote {len(labeled.trace)} frames to {out_path} and labels to {labels}", err=True)


def _read_labels(path: str) -> tuple[list[tuple[float, float]], dict]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ParseError(f"labels file is not valid JSON: {exc}") from None
    try:
        episodes = [(float(s), float(e)) for s, e in data["drowsy_episodes"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad labels file: {exc}", field="drowsy_episodes") from None
    return episodes, dict(data.get("detector") or {})


@cli.command(name="eval")
@click.argument("trace_path", metavar="TRACE", required=False)
@click.argument("labels_path", metavar="LABELS", required=False)
@click.option("--table", is_flag=True, help="Evaluate all ten accuracy-table scenarios.")
@click.option("--scenario-dir", default=None, help="Directory of table scenarios (default: bundled).")
@click.option("--grace-s", type=float, default=DEFAULT_GRACE_S, show_default=True,
              help="Seconds after an episode ends during which an alarm still counts.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@detector_options
def eval_cmd(trace_path, labels_path, table, scenario_dir, grace_s, fmt, config_path, **kwargs):
    """Score detector alarms against labeled drowsy episodes."""
    flags = _pop_detector_flags(kwargs)
    with _exit_on_error():
        if table:
            report = reproduce_paper_table(scenario_dir, grace_s)
            click.echo(render_table(report) if fmt == "text" else dumps_report(report.to_dict()), nl=False)
            return
        if not trace_path or not labels_path:
            raise click.UsageError("TRACE and LABELS are required unless --table is given")
        episodes, hints = _read_labels(labels_path)
        config = build_config(flags, config_path, hints)
        trace = read_trace(trace_path)
        result = match_alarms(run_detector_on_trace(trace, config), episodes, grace_s)
        if fmt == "text":
            click.echo(render_report(result, title=f"trace: {trace.source_id}"), nl=False)
        else:
            click.echo(dumps_report({"trace_id": trace.source_id, **result.to_dict()}), nl=False)


@cli.command()
@click.argument("trace_path", metavar="TRACE")
@click.option("-o", "--out", "out_path", default="-", help="CSV destination; '-' is stdout.")
@click.option("--svg", "svg_path", default=None, help="Also write an SVG chart of EAR and score.")
@detector_options
def plot(trace_path, out_path, svg_path, config_path, **kwargs):
    """Write per-frame EAR, state, score, alarm and PERCLOS as CSV."""
    flags = _pop_detector_flags(kwargs)
    with _exit_on_error():
        config = build_config(flags, config_path)
    detector = Detector(config)
    rows: list[PlotRow] = []
    with _exit_on_error(), ExitStack() as stack:
        sink = (
            click.get_text_stream("stdout")
            if out_path == "-"
            else stack.enter_context(open(out_path, "w", encoding="utf-8", newline="\n"))
        )
        sink.write(csv_header())
        for obs in open_trace(trace_path):
            detector.feed(obs)
            row = PlotRow.from_step(obs, detector)
            sink.write(csv_line(row))
            if svg_path:
                rows.append(row)
        sink.flush()
        if svg_path:
            Path(svg_path).write_text(render_svg(rows, config), encoding="utf-8")


def main(argv: list[str] | None = None) -> None:
    cli.main(args=argv, prog_name="drowsy")


if __name__ == "__main__":
    main()
