"""Motion vectors in polar form and interval arithmetic on the line and circle.

Angles are radians measured from the positive x-axis and live in (-pi, pi].
All functions accept scalars or numpy arrays unless noted otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
MAX_MAGNITUDE = math.sqrt(2.0)


def wrap_angle(theta):
    """Map angles onto (-pi, pi]; values already in range pass through untouched."""
    theta = np.asarray(theta, dtype=float)
    in_range = (theta > -np.pi) & (theta <= np.pi)
    wrapped = np.where(in_range, theta, np.pi - np.mod(np.pi - theta, TWO_PI))
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class MotionVector:
    """Displacement in normalized image coordinates (fractions of width/height)."""

    dx: float
    dy: float

    def angle(self) -> float:
        # atan2(0, 0) is platform-defined in spirit; pin it to 0
        if self.dx == 0.0 and self.dy == 0.0:
            return 0.0
        return wrap_angle(math.atan2(self.dy, self.dx))

    def magnitude(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval lower bound {self.lo} exceeds upper bound {self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class CircularInterval:
    """Arc of the circle given by its center and half-width.

    A half-width of pi covers the whole circle.
    """

    center: float
    half_width: float

    def __post_init__(self):
        if not 0.0 <= self.half_width <= np.pi:
            raise ValueError(f"half_width must lie in [0, pi], got {self.half_width}")
        object.__setattr__(self, "center", wrap_angle(self.center))

    @property
    def width(self) -> float:
        return 2.0 * self.half_width

    @property
    def is_full(self) -> bool:
        return self.half_width >= np.pi


def to_polar(v: MotionVector) -> tuple[float, float]:
    return v.angle(), v.magnitude()


def from_polar(angle: float, magnitude: float) -> MotionVector:
    return MotionVector(magnitude * math.cos(angle), magnitude * math.sin(angle))


def circular_residual(a, b):
    """Shortest arc length between two angles, in [0, pi]."""
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), TWO_PI)
    out = np.minimum(d, TWO_PI - d)
    if np.ndim(out) == 0:
        return float(out)
    return out


def circ_contains(ci: CircularInterval, theta) -> bool:
    return circular_residual(theta, ci.center) <= ci.half_width


def contains(iv: Interval, y) -> bool:
    return (iv.lo <= y) & (y <= iv.hi)
