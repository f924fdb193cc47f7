"""Conformity scores and the finite-sample corrected empirical quantile."""

from __future__ import annotations

import math

import numpy as np

from polarcp.geometry import circular_residual

# level * n values closer than this to an integer are treated as that integer,
# so e.g. alpha=0.3, n=9 gives k=7 rather than 8 from float round-off
_RANK_TOL = 1e-9


def cp_score(y, y_hat, circular: bool = False):
    """Absolute residual; shortest-arc residual when ``circular`` is set."""
    if circular:
        return circular_residual(y, y_hat)
    out = np.abs(np.asarray(y, dtype=float) - np.asarray(y_hat, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def cqr_score(y, q_lo, q_hi, circular: bool = False):
    """Signed distance of ``y`` outside the band ``[q_lo, q_hi]``.

    Negative when ``y`` sits strictly inside the band. With ``circular`` set the
    band is read as an arc around its midpoint, which agrees with
    ``max(q_lo - y, y - q_hi)`` whenever no wrap-around is involved.
    """
    y = np.asarray(y, dtype=float)
    q_lo = np.asarray(q_lo, dtype=float)
    q_hi = np.asarray(q_hi, dtype=float)
    if circular:
        mid = 0.5 * (q_lo + q_hi)
        out = circular_residual(y, mid) - 0.5 * (q_hi - q_lo)
    else:
        out = np.maximum(q_lo - y, y - q_hi)
    return float(out) if np.ndim(out) == 0 else out


def quantile_rank(n: int, alpha: float) -> int:
    """1-based rank k of the order statistic used as the conformal threshold."""
    level_times_n = (1.0 - alpha) * (n + 1)
    k = math.ceil(level_times_n - _RANK_TOL)
    return min(max(k, 1), n)


def adjusted_quantile(scores, alpha: float) -> float:
    """The ``(1 - alpha)(1 + 1/n)``-th empirical quantile of ``scores``.

    Uses the k-th smallest score with ``k = ceil((1 - alpha)(n + 1))``, clamped
    to ``[1, n]``; levels at or above one return the maximum score.

    Raises
    ------
    ValueError
        If ``scores`` is empty or ``alpha`` is not in (0, 1).
    """
    s = np.asarray(scores, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("empty calibration set")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    k = quantile_rank(s.size, alpha)
    return float(np.partition(s, k - 1)[k - 1])
