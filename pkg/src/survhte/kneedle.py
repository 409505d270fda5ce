"""Knee-point detection on descending score curves.

Scores sorted by rank are min-max normalized on both axes and compared
against the falling diagonal chord. Where the curve bulges above the
chord (plateau-then-drop shape) the knee sits at the bulge itself; where
it sags below (drop-then-flat-tail shape, the common case for importance
scores) the knee is the last rank before the sag, i.e. before the curve
flattens out. A three-point moving average locates the dominant
deviation robustly and the exact location is then refined on the raw
difference curve, so one noisy neighbour cannot move the answer.
Straight or constant curves have no knee.
"""

from __future__ import annotations

import numpy as np

from .exceptions import NoKnee

SENSITIVITY = 1.0
SMOOTH_WINDOW = 3


def _moving_average(values: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    out = np.empty_like(values)
    for i in range(len(values)):
        lo = max(0, i - half)
        hi = min(len(values), i + half + 1)
        out[i] = values[lo:hi].mean()
    return out


def knee_point(scores_by_rank) -> int:
    """Rank index (1-based) of the knee: the last rank worth keeping.

    Raises NoKnee when the normalized difference curve has no interior
    extremum above the sensitivity threshold. Invariant to positive
    affine transforms of the scores.
    """
    y = np.asarray(scores_by_rank, dtype=np.float64)
    n = len(y)
    if n < 3:
        raise NoKnee("need at least 3 ranked scores")
    if np.any(np.diff(y) > 1e-12):
        raise ValueError("scores must be sorted in descending rank order")
    spread = y[0] - y[-1]
    if spread <= 0:
        raise NoKnee("all scores equal")
    x_n = np.arange(n, dtype=np.float64) / (n - 1)
    y_n = (y - y[-1]) / spread
    diff = y_n - (1.0 - x_n)
    smooth = _moving_average(diff, SMOOTH_WINDOW)
    mag = np.abs(smooth)

    interior = np.arange(1, n - 1)
    is_extremum = (mag[interior] > mag[interior - 1]) & \
                  (mag[interior] > mag[interior + 1])
    candidates = interior[is_extremum]
    if len(candidates) == 0:
        raise NoKnee("difference curve has no interior extremum")
    threshold = mag[candidates].mean() - SENSITIVITY / (n - 1)
    candidates = candidates[mag[candidates] > threshold]
    if len(candidates) == 0:
        raise NoKnee("no extremum above the sensitivity threshold")
    best = candidates[np.argmax(mag[candidates])]
    # refine on the unsmoothed curve within the smoothing window
    lo = max(0, best - 1)
    hi = min(n, best + 2)
    pivot = lo + int(np.argmax(np.abs(diff[lo:hi])))
    if diff[pivot] > 0:
        knee = pivot  # bulge above the chord: keep through the bulge
    else:
        knee = pivot - 1  # sag below: keep everything before the tail
    if knee < 0:
        raise NoKnee("knee would precede the first rank")
    return int(knee) + 1
