"""Uncertainty heatmaps: nested joint intervals rasterized over the image plane.

Each pixel gets the 1-based index of the lowest coverage level whose joint
(angle x magnitude) interval contains the pixel's displacement from the
instrument origin, or 0 when no level does. Images are binary PGM (P5) with a
JSON legend, so outputs are byte-comparable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from polarcp.conformal import (
    CpCalibrator,
    JointInterval,
    calibrate_cp,
    calibrate_cqr,
    cp_intervals,
    cqr_intervals,
)
from polarcp.geometry import MAX_MAGNITUDE, Interval, MotionVector, circular_residual
from polarcp.quantreg import QuantileHeads
from polarcp.synthdata import MotionData

DEFAULT_LADDER = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
BACKGROUND = 255
GT_INTENSITY = 0
RAMP_LO, RAMP_HI = 40, 220


@dataclass(frozen=True)
class HeatmapGrid:
    width: int
    height: int
    origin: tuple[float, float]
    levels: tuple[float, ...]
    cells: np.ndarray  # (height, width), row 0 at the top of the image

    @property
    def n_levels(self) -> int:
        return len(self.levels)


def pixel_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized ``(x, y)`` coordinates of pixel centers, each ``(height, width)``."""
    x = (np.arange(width) + 0.5) / width
    y = (np.arange(height) + 0.5) / height
    return np.meshgrid(x, y)


def rasterize(intervals, origin=(0.5, 0.5), width: int = 256, height: int = 256) -> HeatmapGrid:
    """Assign each pixel the smallest level whose joint interval contains it.

    ``intervals`` is a sequence of ``(target_coverage, JointInterval)`` sorted by
    strictly increasing coverage.
    """
    if width < 1 or height < 1:
        raise ValueError("heatmap grid must have at least one pixel")
    levels = tuple(float(c) for c, _ in intervals)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("coverage levels must be strictly increasing")
    x, y = pixel_centers(width, height)
    dx, dy = x - origin[0], y - origin[1]
    theta = np.arctan2(dy, dx)
    r = np.hypot(dx, dy)
    cells = np.zeros((height, width), dtype=np.int64)
    # walk from the widest level inwards so the smallest containing level wins
    for idx in range(len(levels), 0, -1):
        j = intervals[idx - 1][1]
        inside = (
            (circular_residual(theta, j.angle.center) <= j.angle.half_width)
            & (j.magnitude.lo <= r)
            & (r <= j.magnitude.hi)
        )
        cells[inside] = idx
    return HeatmapGrid(width, height, (float(origin[0]), float(origin[1])), levels, cells)


def intensity(level: int, n_levels: int) -> int:
    if level == 0:
        return BACKGROUND
    if n_levels == 1:
        return RAMP_LO
    return RAMP_LO + round((RAMP_HI - RAMP_LO) * (level - 1) / (n_levels - 1))


def legend(grid: HeatmapGrid) -> dict:
    return {
        str(i): {"target_coverage": c, "intensity": intensity(i, grid.n_levels)}
        for i, c in enumerate(grid.levels, start=1)
    }


def _line_pixels(x0: int, y0: int, x1: int, y1: int):
    """Bresenham line, endpoints included."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def render(grid: HeatmapGrid, gt_vector: MotionVector | None = None) -> bytes:
    """PGM (P5) bytes; the optional ground-truth vector is drawn in black."""
    lut = np.array([intensity(i, grid.n_levels) for i in range(grid.n_levels + 1)], dtype=np.uint8)
    img = lut[grid.cells]
    if gt_vector is not None:
        ox, oy = grid.origin

        def to_px(x, y):
            return math.floor(x * grid.width), math.floor(y * grid.height)

        x0, y0 = to_px(ox, oy)
        x1, y1 = to_px(ox + gt_vector.dx, oy + gt_vector.dy)
        for px, py in _line_pixels(x0, y0, x1, y1):
            if 0 <= px < grid.width and 0 <= py < grid.height:
                img[py, px] = GT_INTENSITY
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + img.tobytes()


def emit(grid: HeatmapGrid, stem, gt_vector: MotionVector | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.pgm`` and ``<stem>.json``; returns both paths."""
    stem = Path(stem)
    pgm, js = stem.with_suffix(".pgm"), stem.with_suffix(".json")
    pgm.write_bytes(render(grid, gt_vector))
    js.write_text(json.dumps(legend(grid), indent=2) + "\n")
    return pgm, js


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def ladder_intervals(
    method: str,
    cal: MotionData,
    sample: MotionData,
    levels=DEFAULT_LADDER,
    correction=None,
    heads: QuantileHeads | None = None,
    angle_only: bool = False,
) -> list[tuple[float, JointInterval]]:
    """Joint intervals for one sample at every coverage level of the ladder.

    For CQR all levels share one head set and only the conformal expansion
    varies, which keeps the regions nested.
    """
    if len(sample) != 1:
        raise ValueError("ladder_intervals expects a single sample")
    out = []
    for cov in sorted(levels):
        alpha = 1.0 - cov
        if method == "cp":
            c: CpCalibrator = calibrate_cp(cal, alpha, correction)
            j = cp_intervals(c, sample.pred_angle, sample.pred_mag)[0]
        elif method == "cqr":
            if heads is None:
                raise ValueError("method 'cqr' needs trained quantile heads")
            j = cqr_intervals(calibrate_cqr(heads, cal, alpha, correction), sample.features)[0]
        else:
            raise ValueError(f"unknown method {method!r}")
        if angle_only:
            j = JointInterval(j.angle, Interval(0.0, MAX_MAGNITUDE))
        out.append((cov, j))
    return out

