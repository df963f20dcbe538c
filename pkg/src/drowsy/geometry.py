"""Landmark types and the Eye Aspect Ratio (EAR).

Each eye is described by six ordered points ``a1..a6``: ``a1`` the outer
corner, ``a2``/``a3`` along the upper lid, ``a4`` the inner corner and
``a5``/``a6`` along the lower lid (``a6`` under ``a2``, ``a5`` under ``a3``)::

    EAR = (|a2 - a6| + |a3 - a5|) / (2 |a1 - a4|)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DegenerateEye

# Zero-based eye indices in the common 68-point face layout.
LEFT_EYE_INDICES: tuple[int, ...] = (36, 37, 38, 39, 40, 41)
RIGHT_EYE_INDICES: tuple[int, ...] = (42, 43, 44, 45, 46, 47)


@dataclass(frozen=True)
class Point2:
    """A 2D landmark in pixel units."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x!r}, {self.y!r})")

    @classmethod
    def of(cls, xy: Sequence[float]) -> "Point2":
        x, y = xy
        return cls(float(x), float(y))


def _points(values: Iterable[Point2 | Sequence[float]]) -> tuple[Point2, ...]:
    return tuple(v if isinstance(v, Point2) else Point2.of(v) for v in values)


@dataclass(frozen=True)
class EyeLandmarks:
    """The six ordered ocular points a1..a6 of one eye."""

    points: tuple[Point2, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", _points(self.points))
        if len(self.points) != 6:
            raise ValueError(f"an eye needs exactly 6 points, got {len(self.points)}")


@dataclass(frozen=True)
class FaceLandmarks68:
    """All 68 points of one detected face."""

    points: tuple[Point2, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", _points(self.points))
        if len(self.points) != 68:
            raise ValueError(f"a face needs exactly 68 points, got {len(self.points)}")


@dataclass(frozen=True)
class EyePair:
    left: EyeLandmarks
    right: EyeLandmarks


def euclidean_distance(p: Point2, q: Point2) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def compute_ear(eye: EyeLandmarks) -> float:
    """Return the Eye Aspect Ratio of one eye.

    Raises:
        DegenerateEye: if the two horizontal corners coincide.
    """
    a1, a2, a3, a4, a5, a6 = eye.points
    horizontal = euclidean_distance(a1, a4)
    if horizontal == 0.0:
        raise DegenerateEye(f"eye corners coincide at ({a1.x}, {a1.y})")
    return (euclidean_distance(a2, a6) + euclidean_distance(a3, a5)) / (2.0 * horizontal)


def extract_eyes(
    face: FaceLandmarks68,
    left_indices: Sequence[int] = LEFT_EYE_INDICES,
    right_indices: Sequence[int] = RIGHT_EYE_INDICES,
) -> EyePair:
    """Slice both eyes out of a 68-point face.

    The index maps default to the usual 36..41 / 42..47 layout and can be
    overridden when a landmark source numbers the eyes differently.
    """
    pts = face.points
    return EyePair(
        left=EyeLandmarks(tuple(pts[i] for i in left_indices)),
        right=EyeLandmarks(tuple(pts[i] for i in right_indices)),
    )


def mean_ear(pair: EyePair) -> float:
    """Arithmetic mean of the two per-eye EAR values."""
    return (compute_ear(pair.left) + compute_ear(pair.right)) / 2.0
