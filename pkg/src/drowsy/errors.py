"""Exception types raised across the package."""

from __future__ import annotations


class DrowsyError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateEye(DrowsyError, ValueError):
    """The horizontal eye corners coincide, so EAR is undefined."""


class NonMonotonicTimestamp(DrowsyError, ValueError):
    """A frame timestamp did not strictly increase."""

    def __init__(self, timestamp: float, previous: float, frame_index: int | None = None):
        self.timestamp = timestamp
        self.previous = previous
        self.frame_index = frame_index
        where = f" at frame {frame_index}" if frame_index is not None else ""
        super().__init__(f"timestamp {timestamp!r} does not follow {previous!r}{where}")


class EmptyWindow(DrowsyError, ValueError):
    """PERCLOS was requested before any frame was processed."""


class RecordError(DrowsyError, ValueError):
    """Base for frame-record errors; carries the 1-based line number and field path."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.message = message
        self.line = line
        self.field = field
        super().__init__(self._render())

    def _render(self) -> str:
        parts = []
        if self.line is not None:
            parts.append(f"line {self.line}")
        if self.field:
            parts.append(f"field {self.field}")
        prefix = ", ".join(parts)
        return f"{prefix}: {self.message}" if prefix else self.message

    def at_line(self, line: int) -> "RecordError":
        self.line = line
        self.args = (self._render(),)
        return self


class ParseError(RecordError):
    """A record is not syntactically valid."""


class SchemaError(RecordError):
    """A record parsed but violates the frame-record schema."""


class InvalidScript(DrowsyError, ValueError):
    """A scenario script violates its invariants."""


class UnknownRow(DrowsyError, KeyError):
    """No accuracy-table row matches the descriptor."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown row"


class MissingScenario(DrowsyError, FileNotFoundError):
    """A bundled scenario file is absent."""


class ZeroTotal(DrowsyError, ZeroDivisionError):
    """correct_rate was asked for zero tests."""
