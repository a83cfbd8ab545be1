"""DTW-based recognition discrepancy between observed and generalized actions."""

from __future__ import annotations

import numba
import numpy as np

from .errors import InvalidArgument
from .model import FeatureTrajectory, ObservedTrajectory

RANGE_FLOOR = 1e-9


def cost_matrix(o, x) -> np.ndarray:
    """Absolute-difference ground cost: cell ``(a, b) = |o[a] - x[b]|``."""
    o = np.asarray(o, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if o.size == 0 or x.size == 0:
        raise InvalidArgument("cost_matrix needs nonempty sequences")
    return np.abs(o[:, None] - x[None, :])


@numba.njit(cache=True)
def _dtw(c):
    rows, cols = c.shape
    acc = np.empty((rows, cols))
    acc[0, 0] = c[0, 0]
    for b in range(1, cols):
        acc[0, b] = acc[0, b - 1] + c[0, b]
    for a in range(1, rows):
        acc[a, 0] = acc[a - 1, 0] + c[a, 0]
        for b in range(1, cols):
            best = acc[a - 1, b - 1]
            if acc[a - 1, b] < best:
                best = acc[a - 1, b]
            if acc[a, b - 1] < best:
                best = acc[a, b - 1]
            acc[a, b] = best + c[a, b]
    return acc[rows - 1, cols - 1]


def dtw_cost(matrix) -> float:
    """Minimal cumulative cost of a monotone path from the first to the last cell.

    Steps are right, down and diagonal, all unweighted; no window.
    """
    c = np.ascontiguousarray(matrix, dtype=float)
    if c.ndim != 2 or c.size == 0:
        raise InvalidArgument("dtw_cost needs a nonempty 2-D cost matrix")
    return float(_dtw(c))


def feature_weights(action: FeatureTrajectory, normalize: bool = True) -> np.ndarray:
    """Per-feature scale factors: inverse range of each feature, or all ones."""
    if not normalize:
        return np.ones(action.m)
    span = action.values.max(axis=1) - action.values.min(axis=1)
    return 1.0 / np.maximum(span, RANGE_FLOOR)


def _check_weights(w, m):
    w = np.asarray(w, dtype=float)
    if w.shape != (m,):
        raise InvalidArgument(f"expected {m} weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise InvalidArgument("feature weights must be positive")
    return w


def discrepancy(observed: ObservedTrajectory, action: FeatureTrajectory, weights=None) -> float:
    if observed.m != action.m:
        raise InvalidArgument(f"observed has {observed.m} features, action has {action.m}")
    w = _check_weights(np.ones(action.m) if weights is None else weights, action.m)
    total = 0.0
    for i in range(action.m):
        total += w[i] * dtw_cost(cost_matrix(observed.values[i], action.values[i]))
    return float(total)


def goal_discrepancy(p, goal, weights=None) -> float:
    """Weighted Euclidean distance between a feature point and one goal column."""
    p = np.asarray(p, dtype=float).ravel()
    goal = np.asarray(goal, dtype=float).ravel()
    if p.shape != goal.shape:
        raise InvalidArgument(f"perception length {p.size} != goal length {goal.size}")
    w = np.ones(p.size) if weights is None else _check_weights(weights, p.size)
    return float(np.sqrt(np.sum((w * (p - goal)) ** 2)))
