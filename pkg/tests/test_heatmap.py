import json
import math

import numpy as np
import pytest

from polarcp.conformal import JointInterval, joint_contains
from polarcp.geometry import CircularInterval, Interval, MotionVector
from polarcp.heatmap import (
    BACKGROUND,
    DEFAULT_LADDER,
    GT_INTENSITY,
    emit,
    ladder_intervals,
    legend,
    pixel_centers,
    rasterize,
    read_pgm,
    render,
)
from polarcp.quantreg import TrainConfig, train
from polarcp.synthdata import split

QUADRANT = JointInterval(CircularInterval(math.pi / 4, math.pi / 4), Interval(0.1, 0.3))


def _level_masks(intervals, size=96, origin=(0.5, 0.5)):
    x, y = pixel_centers(size, size)
    theta = np.arctan2(y - origin[1], x - origin[0])
    r = np.hypot(x - origin[0], y - origin[1])
    masks = []
    for _, j in intervals:
        inside = np.vectorize(lambda t, rr, j=j: joint_contains(j, t, rr))(theta, r)
        masks.append(inside)
    return masks


@pytest.fixture(scope="module")
def ladder_heads(train_data):
    # one head set at the widest miscoverage, shared by every level
    return train(train_data.features, train_data.gt_angle, train_data.gt_mag,
                 1 - min(DEFAULT_LADDER), TrainConfig(epochs=100))


class TestRasterize:
    def test_hand_computed_pixel(self):
        # displacement (0.14, 0.14): 45 degrees at radius ~0.198
        assert joint_contains(QUADRANT, math.atan2(0.14, 0.14), math.hypot(0.14, 0.14))
        grid = rasterize([(0.5, QUADRANT)], (0.5, 0.5), 50, 50)
        # pixel (32, 32) has its center at (0.65, 0.65): radius 0.212, 45 degrees
        assert grid.cells[32, 32] == 1
        assert grid.cells[25, 10] == 0

    def test_full_circle_is_annulus(self):
        j = JointInterval(CircularInterval(1.0, math.pi), Interval(0.1, 0.3))
        grid = rasterize([(0.5, j)], (0.5, 0.5), 80, 80)
        x, y = pixel_centers(80, 80)
        r = np.hypot(x - 0.5, y - 0.5)
        assert np.array_equal(grid.cells == 1, (r >= 0.1) & (r <= 0.3))

    def test_disk(self):
        j = JointInterval(CircularInterval(0.0, math.pi), Interval(0.0, 0.2))
        grid = rasterize([(0.5, j)], (0.3, 0.6), 64, 48)
        x, y = pixel_centers(64, 48)
        assert grid.cells.shape == (48, 64)
        assert np.array_equal(grid.cells == 1, np.hypot(x - 0.3, y - 0.6) <= 0.2)

    def test_zero_size(self):
        with pytest.raises(ValueError):
            rasterize([(0.5, QUADRANT)], (0.5, 0.5), 0, 10)

    def test_levels_must_increase(self):
        with pytest.raises(ValueError):
            rasterize([(0.5, QUADRANT), (0.4, QUADRANT)])

    def test_agrees_with_joint_contains(self, pool):
        cal, test = split(pool, 500, seed=0)
        intervals = ladder_intervals("cp", cal, test.subset([0]), correction="sidak")
        grid = rasterize(intervals, (0.5, 0.5), 128, 128)
        x, y = pixel_centers(128, 128)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            row, col = rng.integers(0, 128, size=2)
            dx, dy = x[row, col] - 0.5, y[row, col] - 0.5
            theta, r = math.atan2(dy, dx), math.hypot(dx, dy)
            expected = next((i for i, (_, j) in enumerate(intervals, 1) if joint_contains(j, theta, r)), 0)
            assert grid.cells[row, col] == expected


class TestNesting:
    @pytest.mark.parametrize("method", ["cp", "cqr"])
    @pytest.mark.parametrize("correction", ["none", "sidak", "bonferroni", "maxrank"])
    def test_regions_nested(self, pool, ladder_heads, method, correction):
        heads = ladder_heads if method == "cqr" else None
        cal, test = split(pool, 500, seed=2)
        for k in range(3):
            intervals = ladder_intervals(method, cal, test.subset([k]), DEFAULT_LADDER, correction, heads)
            masks = _level_masks(intervals, size=48)
            for inner, outer in zip(masks, masks[1:]):
                assert np.all(outer[inner])
            grid = rasterize(intervals, (0.5, 0.5), 48, 48)
            for level in range(1, len(intervals) + 1):
                hit = grid.cells == level
                for m in masks[level - 1 :]:
                    assert np.all(m[hit])


class TestEmit:
    def test_empty_grid_uniform(self):
        far = JointInterval(CircularInterval(0.0, 0.1), Interval(1.2, 1.3))
        grid = rasterize([(0.1, far), (0.2, far)], (0.5, 0.5), 20, 10)
        img = np.frombuffer(render(grid)[len(b"P5\n20 10\n255\n"):], dtype=np.uint8)
        assert img.size == 200 and np.all(img == BACKGROUND)

    def test_legend(self):
        grid = rasterize([(c, QUADRANT) for c in DEFAULT_LADDER], (0.5, 0.5), 16, 16)
        lg = legend(grid)
        assert len(lg) == 8
        assert [lg[str(i)]["target_coverage"] for i in range(1, 9)] == list(DEFAULT_LADDER)
        ints = [lg[str(i)]["intensity"] for i in range(1, 9)]
        assert ints == sorted(ints) and len(set(ints)) == 8
        assert GT_INTENSITY not in ints and BACKGROUND not in ints

    def test_files_and_determinism(self, tmp_path):
        grid = rasterize([(0.3, QUADRANT)], (0.5, 0.5), 40, 30)
        gt = MotionVector(0.2, 0.1)
        p1, j1 = emit(grid, tmp_path / "a", gt)
        p2, _ = emit(grid, tmp_path / "b", gt)
        assert p1.read_bytes() == p2.read_bytes()
        assert p1.read_bytes().startswith(b"P5\n40 30\n255\n")
        img = read_pgm(p1)
        assert img.shape == (30, 40)
        assert img[15, 20] == GT_INTENSITY  # origin pixel lies on the vector
        assert json.loads(j1.read_text()) == legend(grid)
