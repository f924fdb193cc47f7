"""Split-CP and CQR calibrators for angle and magnitude, and joint intervals.

A calibrator freezes one threshold per quantity from calibration scores. Joint
angle x magnitude intervals combine the two marginal intervals; without a
correction their joint coverage degrades towards ``1 - k * alpha``, so the
thresholds can instead be taken at a Bonferroni or Sidak corrected level, or
from the Max-Rank rule on min-max scaled scores.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from polarcp.geometry import (
    MAX_MAGNITUDE,
    CircularInterval,
    Interval,
    circ_contains,
    circular_residual,
    contains,
    wrap_angle,
)
from polarcp.quantreg import QuantileHeads
from polarcp.scores import adjusted_quantile, cp_score, cqr_score
from polarcp.synthdata import MotionData

METHODS = ("cp", "cqr")
CORRECTIONS = ("none", "bonferroni", "sidak", "maxrank")


@dataclass(frozen=True)
class Correction:
    kind: str = "none"
    k: int = 2

    def __post_init__(self):
        kind = self.kind.lower().replace("-", "").replace("_", "")
        # the two names appear interchangeably for the same procedure
        if kind == "maxscore":
            kind = "maxrank"
        if kind not in CORRECTIONS:
            raise ValueError(f"unknown correction {self.kind!r}; choose from {', '.join(CORRECTIONS)}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "kind", kind)


def _as_correction(correction) -> Correction:
    if correction is None:
        return Correction("none")
    if isinstance(correction, str):
        return Correction(correction)
    return correction


def corrected_alpha(alpha: float, correction) -> float:
    """Per-test miscoverage level for ``k`` simultaneous tests."""
    c = _as_correction(correction)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if c.k == 1:
        return alpha
    if c.kind == "bonferroni":
        return alpha / c.k
    if c.kind == "sidak":
        return 1.0 - (1.0 - alpha) ** (1.0 / c.k)
    return alpha


def _minmax(scores: np.ndarray) -> tuple[float, float, np.ndarray]:
    lo, hi = float(scores.min()), float(scores.max())
    if hi == lo:
        return lo, hi, np.zeros_like(scores)
    return lo, hi, (scores - lo) / (hi - lo)


def max_rank_thresholds(cal_scores_angle, cal_scores_mag, alpha: float) -> tuple[float, float]:
    """Thresholds from the conformal quantile of the per-sample maximum of
    min-max scaled scores, mapped back onto each score's own range."""
    sa = np.asarray(cal_scores_angle, dtype=float).ravel()
    sm = np.asarray(cal_scores_mag, dtype=float).ravel()
    if sa.size != sm.size:
        raise ValueError("score vectors must have equal length")
    if sa.size == 0:
        raise ValueError("empty calibration set")
    lo_a, hi_a, za = _minmax(sa)
    lo_m, hi_m, zm = _minmax(sm)
    m = adjusted_quantile(np.maximum(za, zm), alpha)
    return lo_a + m * (hi_a - lo_a), lo_m + m * (hi_m - lo_m)


def thresholds(scores_angle, scores_mag, alpha: float, correction=None) -> tuple[float, float]:
    c = _as_correction(correction)
    if c.kind == "maxrank" and c.k > 1:
        return max_rank_thresholds(scores_angle, scores_mag, alpha)
    a = corrected_alpha(alpha, c)
    return adjusted_quantile(scores_angle, a), adjusted_quantile(scores_mag, a)


@dataclass(frozen=True)
class JointInterval:
    angle: CircularInterval
    magnitude: Interval


def joint_contains(j: JointInterval, gt_angle: float, gt_mag: float) -> bool:
    return bool(circ_contains(j.angle, gt_angle) and contains(j.magnitude, gt_mag))


@dataclass(frozen=True)
class IntervalBatch:
    """Joint intervals for many test points, stored column-wise."""

    angle_center: np.ndarray
    angle_half_width: np.ndarray
    mag_lo: np.ndarray
    mag_hi: np.ndarray

    def __len__(self) -> int:
        return len(self.angle_center)

    def __getitem__(self, i: int) -> JointInterval:
        return JointInterval(
            CircularInterval(float(self.angle_center[i]), float(self.angle_half_width[i])),
            Interval(float(self.mag_lo[i]), float(self.mag_hi[i])),
        )

    @property
    def angle_width(self) -> np.ndarray:
        return 2.0 * self.angle_half_width

    @property
    def mag_width(self) -> np.ndarray:
        return self.mag_hi - self.mag_lo

    def angle_contains(self, theta) -> np.ndarray:
        return circular_residual(theta, self.angle_center) <= self.angle_half_width

    def mag_contains(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (self.mag_lo <= r) & (r <= self.mag_hi)

    def contains(self, theta, r) -> np.ndarray:
        return self.angle_contains(theta) & self.mag_contains(r)


@dataclass(frozen=True)
class CpCalibrator:
    q_angle: float
    q_mag: float
    alpha: float
    n_cal: int
    correction: Correction = Correction()
    circular: bool = True
    method = "cp"

    def to_dict(self) -> dict:
        return {
            "method": "cp",
            "alpha": self.alpha,
            "correction": self.correction.kind,
            "k": self.correction.k,
            "n_cal": self.n_cal,
            "q_angle": self.q_angle,
            "q_mag": self.q_mag,
            "circular": self.circular,
        }


@dataclass(frozen=True)
class CqrCalibrator:
    heads: QuantileHeads
    q_angle: float
    q_mag: float
    alpha: float
    n_cal: int
    correction: Correction = Correction()
    method = "cqr"

    def to_dict(self) -> dict:
        return {
            "method": "cqr",
            "alpha": self.alpha,
            "correction": self.correction.kind,
            "k": self.correction.k,
            "n_cal": self.n_cal,
            "q_angle": self.q_angle,
            "q_mag": self.q_mag,
            "heads": self.heads.to_dict(),
        }


def cp_scores(cal: MotionData, circular: bool = True) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.atleast_1d(cp_score(cal.gt_angle, cal.pred_angle, circular=circular)),
        np.atleast_1d(cp_score(cal.gt_mag, cal.pred_mag)),
    )


def calibrate_cp(cal: MotionData, alpha: float, correction=None, circular: bool = True) -> CpCalibrator:
    """Freeze split-CP thresholds on absolute angle and magnitude residuals.

    ``circular=False`` uses the plain absolute angle difference instead of the
    shortest arc.
    """
    if len(cal) == 0:
        raise ValueError("empty calibration set")
    c = _as_correction(correction)
    sa, sm = cp_scores(cal, circular)
    qa, qm = thresholds(sa, sm, alpha, c)
    return CpCalibrator(qa, qm, alpha, len(cal), c, circular)


def cp_intervals(c: CpCalibrator, pred_angle, pred_mag) -> IntervalBatch:
    pred_angle = np.atleast_1d(np.asarray(pred_angle, dtype=float))
    pred_mag = np.atleast_1d(np.asarray(pred_mag, dtype=float))
    hw = np.full(pred_angle.shape, min(c.q_angle, math.pi))
    return IntervalBatch(
        np.atleast_1d(wrap_angle(pred_angle)),
        hw,
        np.maximum(0.0, pred_mag - c.q_mag),
        np.minimum(MAX_MAGNITUDE, pred_mag + c.q_mag),
    )


def cp_interval(c: CpCalibrator, pred_angle: float, pred_mag: float) -> JointInterval:
    return cp_intervals(c, pred_angle, pred_mag)[0]


def cqr_scores(heads: QuantileHeads, cal: MotionData) -> tuple[np.ndarray, np.ndarray]:
    q = heads.predict(cal.features)
    return (
        np.atleast_1d(cqr_score(cal.gt_angle, q[:, 0], q[:, 1], circular=True)),
        np.atleast_1d(cqr_score(cal.gt_mag, q[:, 2], q[:, 3])),
    )


def calibrate_cqr(heads: QuantileHeads, cal: MotionData, alpha: float, correction=None) -> CqrCalibrator:
    """Freeze CQR thresholds; these may be negative and then shrink the bands."""
    if len(cal) == 0:
        raise ValueError("empty calibration set")
    c = _as_correction(correction)
    sa, sm = cqr_scores(heads, cal)
    qa, qm = thresholds(sa, sm, alpha, c)
    return CqrCalibrator(heads, qa, qm, alpha, len(cal), c)


def expand_bands(quantiles: np.ndarray, q_angle: float, q_mag: float) -> IntervalBatch:
    """Widen ``(n, 4)`` quantile bands by the conformal thresholds.

    Bands pushed past empty collapse to their midpoint. The angle band becomes
    an arc around its midpoint; magnitudes are clamped to ``[0, sqrt(2)]``.
    """
    q = np.atleast_2d(quantiles)
    mid_a = 0.5 * (q[:, 0] + q[:, 1])
    hw = np.clip(0.5 * (q[:, 1] - q[:, 0]) + q_angle, 0.0, math.pi)
    lo = q[:, 2] - q_mag
    hi = q[:, 3] + q_mag
    crossed = hi < lo
    mid_m = 0.5 * (q[:, 2] + q[:, 3])
    lo = np.where(crossed, mid_m, lo)
    hi = np.where(crossed, mid_m, hi)
    return IntervalBatch(
        np.atleast_1d(wrap_angle(mid_a)),
        hw,
        np.clip(lo, 0.0, MAX_MAGNITUDE),
        np.clip(hi, 0.0, MAX_MAGNITUDE),
    )


def cqr_intervals(c: CqrCalibrator, features) -> IntervalBatch:
    return expand_bands(c.heads.predict(features), c.q_angle, c.q_mag)


def cqr_interval(c: CqrCalibrator, features) -> JointInterval:
    return cqr_intervals(c, np.atleast_2d(features))[0]


def calibrate(method: str, cal: MotionData, alpha: float, correction=None, heads=None):
    if method == "cp":
        return calibrate_cp(cal, alpha, correction)
    if method == "cqr":
        if heads is None:
            raise ValueError("method 'cqr' needs trained quantile heads")
        return calibrate_cqr(heads, cal, alpha, correction)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def predict_intervals(calibrator, data: MotionData) -> IntervalBatch:
    if isinstance(calibrator, CpCalibrator):
        return cp_intervals(calibrator, data.pred_angle, data.pred_mag)
    return cqr_intervals(calibrator, data.features)


def joint_interval(method: str, correction, cal: MotionData, alpha: float, test: MotionData, heads=None) -> IntervalBatch:
    """Calibrate at the corrected level and build joint intervals for ``test``."""
    return predict_intervals(calibrate(method, cal, alpha, correction, heads), test)


def save_calibrator(calibrator, path) -> None:
    Path(path).write_text(json.dumps(calibrator.to_dict(), indent=2) + "\n")


def calibrator_from_dict(doc: dict):
    correction = Correction(doc["correction"], int(doc.get("k", 2)))
    if doc["method"] == "cp":
        return CpCalibrator(
            float(doc["q_angle"]), float(doc["q_mag"]), float(doc["alpha"]), int(doc["n_cal"]),
            correction, bool(doc.get("circular", True)),
        )
    if doc["method"] == "cqr":
        return CqrCalibrator(
            QuantileHeads.from_dict(doc["heads"]), float(doc["q_angle"]), float(doc["q_mag"]),
            float(doc["alpha"]), int(doc["n_cal"]), correction,
        )
    raise ValueError(f"unknown method {doc['method']!r}")


def load_calibrator(path):
    return calibrator_from_dict(json.loads(Path(path).read_text()))
