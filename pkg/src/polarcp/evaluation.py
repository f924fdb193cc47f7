"""Coverage / interval-width evaluation over repeated calibration-test shuffles."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from polarcp.conformal import CORRECTIONS, METHODS, Correction, IntervalBatch, calibrate, predict_intervals
from polarcp.quantreg import QuantileHeads, TrainConfig, train
from polarcp.synthdata import MotionData, split


@dataclass(frozen=True)
class TrialReport:
    method: str
    correction: str
    alpha: float
    coverage: float  # joint
    angle_coverage: float
    mag_coverage: float
    mean_angle_width: float  # radians, full width
    mean_mag_width: float
    angle_width_std: float  # spread of widths across test points


@dataclass(frozen=True)
class AggregateReport:
    method: str
    correction: str
    alpha: float
    n_trials: int
    mean_coverage: float
    std_coverage: float
    mean_angle_coverage: float
    std_angle_coverage: float
    mean_mag_coverage: float
    std_mag_coverage: float
    mean_angle_width: float
    std_angle_width: float
    mean_mag_width: float
    std_mag_width: float

    @property
    def target(self) -> float:
        return 1.0 - self.alpha


def score_intervals(batch: IntervalBatch, test: MotionData, method: str, correction: str, alpha: float) -> TrialReport:
    if len(test) == 0:
        raise ValueError("empty test set")
    a_in = batch.angle_contains(test.gt_angle)
    m_in = batch.mag_contains(test.gt_mag)
    return TrialReport(
        method,
        correction,
        alpha,
        float(np.mean(a_in & m_in)),
        float(np.mean(a_in)),
        float(np.mean(m_in)),
        float(np.mean(batch.angle_width)),
        float(np.mean(batch.mag_width)),
        # shifting by one element keeps constant widths at exactly zero spread
        float(np.std(batch.angle_width - batch.angle_width[0])),
    )


def evaluate_trial(method: str, correction, alpha: float, cal: MotionData, test: MotionData, heads=None) -> TrialReport:
    """Calibrate on ``cal`` and measure coverage and widths on ``test``.

    ``coverage`` is the joint event; the marginal hit rates are reported
    alongside. With ``correction='none'`` the marginals are the plain
    single-quantity intervals at level ``1 - alpha``.
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    c = correction if isinstance(correction, Correction) else Correction(correction or "none")
    batch = predict_intervals(calibrate(method, cal, alpha, c, heads), test)
    return score_intervals(batch, test, method, c.kind, alpha)


def aggregate(trials: list[TrialReport]) -> AggregateReport:
    if not trials:
        raise ValueError("need at least one trial")

    def ms(attr):
        v = np.array([getattr(t, attr) for t in trials])
        return float(v.mean()), float(v.std())  # population std

    first = trials[0]
    return AggregateReport(
        first.method,
        first.correction,
        first.alpha,
        len(trials),
        *ms("coverage"),
        *ms("angle_coverage"),
        *ms("mag_coverage"),
        *ms("mean_angle_width"),
        *ms("mean_mag_width"),
    )


def trial_seeds(seed: int, n_trials: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(seed).integers(0, 2**31 - 1, size=n_trials)]


def train_heads(train_data: MotionData, alphas, cfg: TrainConfig | None = None) -> dict[float, QuantileHeads]:
    """One head set per nominal alpha, shared by every correction at that alpha."""
    return {
        a: train(train_data.features, train_data.gt_angle, train_data.gt_mag, a, cfg)
        for a in sorted(set(alphas))
    }


def run_protocol(
    data: MotionData,
    methods=METHODS,
    corrections=CORRECTIONS,
    alphas=(0.3, 0.4),
    n_trials: int = 20,
    n_cal: int = 500,
    n_test: int | None = None,
    seed: int = 0,
    heads: dict[float, QuantileHeads] | None = None,
    train_data: MotionData | None = None,
    train_cfg: TrainConfig | None = None,
    return_trials: bool = False,
):
    """Run every (method, correction, alpha) cell over ``n_trials`` shuffles.

    Trial ``t`` uses the same calibration/test split for every cell, so cells are
    paired. CQR needs either ``heads`` keyed by alpha or ``train_data``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    methods, corrections, alphas = list(methods), list(corrections), list(alphas)
    if "cqr" in methods and heads is None:
        if train_data is None:
            raise ValueError("cqr evaluation needs heads or train_data")
        heads = train_heads(train_data, alphas, train_cfg)
    cells = [(m, c, a) for m in methods for c in corrections for a in alphas]
    trials = {cell: [] for cell in cells}
    for s in trial_seeds(seed, n_trials):
        cal, test = split(data, n_cal, s, n_test)
        for m, c, a in cells:
            h = heads[a] if m == "cqr" else None
            trials[(m, c, a)].append(evaluate_trial(m, c, a, cal, test, h))
    reports = [aggregate(trials[cell]) for cell in cells]
    if return_trials:
        return reports, trials
    return reports


CSV_COLUMNS = [
    "method",
    "correction",
    "alpha",
    "mean_cov",
    "std_cov",
    "mean_width_angle_deg",
    "std_width_angle_deg",
    "mean_width_mag",
    "std_width_mag",
    "mean_cov_angle",
    "std_cov_angle",
    "mean_cov_mag",
    "std_cov_mag",
    "n_trials",
]


def report_row(r: AggregateReport) -> list:
    return [
        r.method,
        r.correction,
        r.alpha,
        r.mean_coverage,
        r.std_coverage,
        math.degrees(r.mean_angle_width),
        math.degrees(r.std_angle_width),
        r.mean_mag_width,
        r.std_mag_width,
        r.mean_angle_coverage,
        r.std_angle_coverage,
        r.mean_mag_coverage,
        r.std_mag_coverage,
        r.n_trials,
    ]


def reports_to_csv(reports: list[AggregateReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([f"{x:.6f}" if isinstance(x, float) else x for x in report_row(r)])
    return buf.getvalue()


def format_table(reports: list[AggregateReport]) -> str:
    """Aligned text table; coverages in percent, angle widths in degrees."""
    head = ["method", "correction", "target", "joint cov (%)", "angle cov (%)", "mag cov (%)", "angle width", "mag width"]
    rows = [head]
    for r in reports:
        rows.append(
            [
                r.method,
                r.correction,
                f"{100 * r.target:.0f}%",
                f"{100 * r.mean_coverage:.1f} ± {100 * r.std_coverage:.1f}",
                f"{100 * r.mean_angle_coverage:.1f} ± {100 * r.std_angle_coverage:.1f}",
                f"{100 * r.mean_mag_coverage:.1f} ± {100 * r.std_mag_coverage:.1f}",
                f"{math.degrees(r.mean_angle_width):.1f}° ± {math.degrees(r.std_angle_width):.1f}°",
                f"{r.mean_mag_width:.3f} ± {r.std_mag_width:.3f}",
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(head))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


__all__ = [
    "AggregateReport",
    "TrialReport",
    "aggregate",
    "evaluate_trial",
    "format_table",
    "reports_to_csv",
    "run_protocol",
    "score_intervals",
    "train_heads",
]
