"""Conformal prediction intervals for 2-D motion forecasts in polar form."""

from polarcp.geometry import (
    CircularInterval,
    Interval,
    MotionVector,
    circ_contains,
    circular_residual,
    contains,
    from_polar,
    to_polar,
    wrap_angle,
)
from polarcp.scores import adjusted_quantile, cp_score, cqr_score

__version__ = "0.1.0"

__all__ = [
    "CircularInterval",
    "Interval",
    "MotionVector",
    "adjusted_quantile",
    "circ_contains",
    "circular_residual",
    "contains",
    "cp_score",
    "cqr_score",
    "from_polar",
    "to_polar",
    "wrap_angle",
]
