"""Synthetic stand-in for a motion forecaster and its ground truth.

Each sample belongs to one of three noise strata. Ground-truth directions
follow a von Mises law and lengths a per-stratum log-normal; the "forecast"
is the truth plus a systematic bias and stratum-scaled noise (wrapped normal
for angles). Features expose a noisy
one-hot stratum code together with the forecast itself, playing the role of
the latent a frozen encoder would hand to the quantile heads.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from polarcp.geometry import MAX_MAGNITUDE, wrap_angle

N_STRATA = 3
# one-hot code + cos, sin, angle/pi, magnitude
N_INFORMATIVE = N_STRATA + 4
CSV_COMMENT = "# polarcp dataset; angles in radians on (-pi, pi], magnitudes as fraction of image size"


class DatasetFormatError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    n: int = 3000
    seed: int = 7
    angle_noise: tuple[float, float, float] = (0.4, 1.0, 1.9)
    angle_mean: float = 0.0
    angle_concentration: float = 2.0
    mag_noise: tuple[float, float, float] = (0.08, 0.2, 0.4)
    angle_bias: float = 0.05
    mag_bias: float = 0.02
    mag_median: tuple[float, float, float] = (0.2, 0.26, 0.32)
    feature_dim: int = 8
    feature_noise: float = 0.1

    def __post_init__(self):
        self.angle_noise = tuple(float(s) for s in self.angle_noise)
        self.mag_noise = tuple(float(s) for s in self.mag_noise)
        self.mag_median = tuple(float(s) for s in self.mag_median)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if len(self.angle_noise) != N_STRATA or len(self.mag_noise) != N_STRATA:
            raise ValueError(f"need exactly {N_STRATA} noise scales per quantity")
        if min(self.angle_noise + self.mag_noise) <= 0:
            raise ValueError("noise scales must be > 0")
        if self.angle_concentration < 0:
            raise ValueError("angle_concentration must be >= 0")
        if self.feature_dim < N_INFORMATIVE:
            raise ValueError(f"feature_dim must be >= {N_INFORMATIVE}")


@dataclass(eq=False)
class MotionData:
    """Column-oriented dataset of forecasts and ground truth."""

    ids: np.ndarray
    features: np.ndarray
    gt_angle: np.ndarray
    gt_mag: np.ndarray
    pred_angle: np.ndarray
    pred_mag: np.ndarray
    stratum: np.ndarray | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MotionData):
            return NotImplemented
        cols = ("ids", "features", "gt_angle", "gt_mag", "pred_angle", "pred_mag")
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in cols)

    def subset(self, idx) -> "MotionData":
        idx = np.asarray(idx, dtype=np.intp)
        return MotionData(
            self.ids[idx],
            self.features[idx],
            self.gt_angle[idx],
            self.gt_mag[idx],
            self.pred_angle[idx],
            self.pred_mag[idx],
            None if self.stratum is None else self.stratum[idx],
        )

    def index_of(self, sample_id: int) -> int:
        hits = np.flatnonzero(self.ids == sample_id)
        if hits.size == 0:
            raise KeyError(f"sample id {sample_id} not in dataset")
        return int(hits[0])


def generate(cfg: GeneratorConfig | None = None) -> MotionData:
    cfg = cfg or GeneratorConfig()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    stratum = rng.integers(0, N_STRATA, size=n)
    angle_sd = np.asarray(cfg.angle_noise)[stratum]
    mag_sd = np.asarray(cfg.mag_noise)[stratum]

    # concentrated directions keep most truths away from the +-pi seam
    gt_angle = wrap_angle(rng.vonmises(cfg.angle_mean, cfg.angle_concentration, size=n))
    median = np.asarray(cfg.mag_median)[stratum]
    gt_mag = np.clip(median * np.exp(0.4 * rng.standard_normal(n)), 1e-3, MAX_MAGNITUDE)

    pred_angle = wrap_angle(gt_angle + cfg.angle_bias + angle_sd * rng.standard_normal(n))
    pred_mag = np.clip(gt_mag + cfg.mag_bias + mag_sd * rng.standard_normal(n), 0.0, MAX_MAGNITUDE)

    onehot = np.eye(N_STRATA)[stratum] + cfg.feature_noise * rng.standard_normal((n, N_STRATA))
    extra = rng.standard_normal((n, cfg.feature_dim - N_INFORMATIVE))
    features = np.column_stack(
        [onehot, np.cos(pred_angle), np.sin(pred_angle), pred_angle / math.pi, pred_mag, extra]
    )
    return MotionData(np.arange(n), features, gt_angle, gt_mag, pred_angle, pred_mag, stratum)


def split(data: MotionData, n_cal: int, seed: int, n_test: int | None = None):
    """Uniformly random calibration/test partition.

    The test part holds the remaining samples, or the first ``n_test`` of them
    in shuffled order when given.
    """
    n = len(data)
    if not 1 <= n_cal < n:
        raise ValueError(f"n_cal must satisfy 1 <= n_cal < {n}, got {n_cal}")
    if n_test is not None and not 1 <= n_test <= n - n_cal:
        raise ValueError(f"n_test must satisfy 1 <= n_test <= {n - n_cal}, got {n_test}")
    perm = np.random.default_rng(seed).permutation(n)
    cal_idx = perm[:n_cal]
    test_idx = perm[n_cal:] if n_test is None else perm[n_cal : n_cal + n_test]
    return data.subset(cal_idx), data.subset(test_idx)


def csv_header(feature_dim: int) -> list[str]:
    return ["id", *(f"f{i}" for i in range(feature_dim)), "gt_angle", "gt_mag", "pred_angle", "pred_mag"]


def to_csv(data: MotionData) -> str:
    buf = io.StringIO()
    buf.write(CSV_COMMENT + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(data.features.shape[1]))
    for i in range(len(data)):
        writer.writerow(
            [
                int(data.ids[i]),
                *(repr(float(x)) for x in data.features[i]),
                repr(float(data.gt_angle[i])),
                repr(float(data.gt_mag[i])),
                repr(float(data.pred_angle[i])),
                repr(float(data.pred_mag[i])),
            ]
        )
    return buf.getvalue()


def write_csv(data: MotionData, path) -> None:
    Path(path).write_text(to_csv(data))


def parse_csv(text: str) -> MotionData:
    """Parse the canonical dataset format; errors name the offending line."""
    rows = []
    header = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].startswith("#"):
            continue
        if header is None:
            d = len(row) - 5
            if d < 1 or row != csv_header(d):
                raise DatasetFormatError(f"line {lineno}: unexpected header {','.join(row)}")
            header = row
            continue
        if len(row) != len(header):
            raise DatasetFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            sid = int(row[0])
            values = [float(x) for x in row[1:]]
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise DatasetFormatError(f"line {lineno}: non-finite value")
        rows.append((sid, values))
    if header is None:
        raise DatasetFormatError("missing header")
    if not rows:
        raise DatasetFormatError("dataset has no rows")
    ids = np.array([r[0] for r in rows])
    if len(np.unique(ids)) != len(ids):
        raise DatasetFormatError("duplicate sample ids")
    vals = np.array([r[1] for r in rows], dtype=float)
    return MotionData(ids, vals[:, :-4], vals[:, -4], vals[:, -3], vals[:, -2], vals[:, -1])


def read_csv(path) -> MotionData:
    return parse_csv(Path(path).read_text())
